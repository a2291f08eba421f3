//! Monte Carlo checks of the simulator against its target covariance.

use windfuse_core::geo::haversine_km;
use windfuse_core::gp::matern_nu1;
use windfuse_core::qc::spearman;
use windfuse_core::sim::{simulate, Layout, SimulationConfig};
use windfuse_core::stats::{pearson, variance};
use windfuse_core::{StationClass, StationRecord};

fn config(stations: Vec<StationRecord>, n_times: usize, rho: f64, seed: u64) -> SimulationConfig {
    SimulationConfig {
        layout: Layout::Stations(stations),
        n_times,
        t0: 1_717_200_000,
        mean: 0.0,
        phi: 200.0,
        sigma_z: 0.7,
        sigma_met: 0.2,
        sigma_pws1: 0.5,
        rho,
        junk_group: vec![],
        junk_sd: 1.0,
        seed,
    }
}

fn met(id: &str, lat: f64, lon: f64) -> StationRecord {
    StationRecord::new(id, lat, lon, StationClass::Met)
}

#[test]
fn marginal_variance_matches_sigma_z() {
    let st = vec![met("a", 53.0, -8.0), met("b", 53.5, -7.0), met("c", 54.4, -9.1), met("d", 52.1, -6.6)];
    let sim = simulate(&config(st, 10_000, 0.0, 3)).unwrap();
    for z in &sim.z {
        let v = variance(z);
        assert!((v / 0.49 - 1.0).abs() < 0.05, "variance {v}");
    }
}

#[test]
fn correlation_at_one_range_is_about_0_139() {
    // two sites 200 km apart along a meridian
    let a = met("a", 52.0, -8.0);
    let lat_b = 52.0 + 200.0 / 111.195;
    let b = met("b", lat_b, -8.0);
    let d = haversine_km(a.lat, a.lon, b.lat, b.lon);
    assert!((d - 200.0).abs() < 1.0, "{d}");
    let expected = matern_nu1(d, 200.0, 1.0);
    assert!((expected - 0.139).abs() < 0.002);
    let sim = simulate(&config(vec![a, b], 10_000, 0.0, 11)).unwrap();
    let r = pearson(&sim.z[0], &sim.z[1]).unwrap();
    assert!((r - 0.139).abs() < 0.03, "{r}");
}

#[test]
fn rho_zero_gives_independent_slices() {
    let st = vec![met("a", 53.0, -8.0), met("b", 53.5, -7.0), met("c", 54.0, -9.0)];
    let sim = simulate(&config(st, 10_000, 0.0, 5)).unwrap();
    for z in &sim.z {
        let r = pearson(&z[..9_999], &z[1..]).unwrap();
        assert!(r.abs() < 0.05, "lag-1 {r}");
    }
}

#[test]
fn junk_stations_are_rank_uncorrelated() {
    let mut cfg = SimulationConfig::table8(0.5, 21);
    cfg.n_times = 10_000;
    let sim = simulate(&cfg).unwrap();
    let opt: Vec<Vec<Option<f64>>> = sim.obs.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
    let n = sim.stations.len();
    for j in (0..n).filter(|&j| sim.junk[j]) {
        assert_eq!(sim.stations[j].class, StationClass::U);
        for k in (0..n).filter(|&k| k != j) {
            let r = spearman(&opt[j], &opt[k]).unwrap();
            assert!(r.abs() < 0.1, "{} vs {}: {r}", sim.stations[j].id, sim.stations[k].id);
        }
    }
}

#[test]
fn kronecker_covariance_over_replications() {
    let st = vec![met("a", 53.0, -8.0), met("b", 53.6, -7.5), met("c", 52.7, -8.9), met("d", 54.1, -8.2)];
    let (ns, nt, reps) = (4usize, 3usize, 100_000usize);
    let rho = 0.8;
    let n = ns * nt;
    let mut sum = vec![0.0; n];
    let mut cross = vec![0.0; n * n];
    let mut cfg = config(st.clone(), nt, rho, 0);
    for r in 0..reps {
        cfg.seed = r as u64;
        let sim = simulate(&cfg).unwrap();
        let v: Vec<f64> = (0..n).map(|k| sim.z[k % ns][k / ns]).collect();
        for i in 0..n {
            sum[i] += v[i];
            for j in 0..n {
                cross[i * n + j] += v[i] * v[j];
            }
        }
    }
    let m: Vec<f64> = sum.iter().map(|s| s / reps as f64).collect();
    let target = |i: usize, j: usize| {
        let (si, ti, sj, tj) = (i % ns, i / ns, j % ns, j / ns);
        let d = haversine_km(st[si].lat, st[si].lon, st[sj].lat, st[sj].lon);
        matern_nu1(d, 200.0, 0.7) * rho.powi((ti as i32 - tj as i32).abs())
    };
    for i in 0..n {
        assert!(m[i].abs() < 3.0 * (target(i, i) / reps as f64).sqrt());
        for j in 0..n {
            let emp = cross[i * n + j] / reps as f64 - m[i] * m[j];
            let se = ((target(i, i) * target(j, j) + target(i, j).powi(2)) / reps as f64).sqrt();
            assert!((emp - target(i, j)).abs() < 3.0 * se, "({i},{j}) {emp} vs {}", target(i, j));
        }
    }
}
