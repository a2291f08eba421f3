//! Synthetic wind fixture: a smooth field on the √wind scale, squared into
//! m/s, with multiplicative low bias at the crowdsourced stations.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use windfuse::io::{write_grid, write_observations, write_stations};
use windfuse_core::bias::{GridParamField, GridPoint};
use windfuse_core::geo::distance_to_polyline_km;
use windfuse_core::sim::{simulate, Layout, SimulationConfig};
use windfuse_core::{Dataset, StationClass, StationRecord, WeibullParams};

pub const T0: i64 = 1_717_200_000;

pub fn coastline() -> Vec<(f64, f64)> {
    (0..=8).map(|i| (51.0 + 0.6 * i as f64, -10.2 + 0.05 * (i % 3) as f64)).collect()
}

pub struct Fixture {
    pub dir: PathBuf,
    pub stations: PathBuf,
    pub observations: PathBuf,
    pub grid: PathBuf,
    pub coastline: PathBuf,
    pub dataset: Dataset,
}

fn stations() -> Vec<StationRecord> {
    let coast = coastline();
    let classes = [
        (StationClass::Met, 8),
        (StationClass::A, 4),
        (StationClass::B, 3),
        (StationClass::C, 3),
        (StationClass::U, 4),
    ];
    let mut out = Vec::new();
    let mut k = 0u32;
    for (class, n) in classes {
        for i in 0..n {
            // deterministic low-discrepancy scatter over the box
            let u = ((k as f64 + 0.5) * 0.618_033_988_75).fract();
            let v = ((k as f64 + 0.5) * 0.754_877_666_25).fract();
            let (lat, lon) = (51.8 + 2.6 * u, -9.6 + 3.2 * v);
            let mut s = StationRecord::new(format!("{}{:02}", class.as_str(), i + 1), lat, lon, class);
            s.dist_to_sea_km = Some(distance_to_polyline_km(lat, lon, &coast));
            out.push(s);
            k += 1;
        }
    }
    out
}

pub fn grid_field() -> GridParamField {
    let mut pts = Vec::new();
    for i in 0..=8 {
        for j in 0..=10 {
            let (lat, lon) = (51.5 + 0.4 * i as f64, -10.0 + 0.4 * j as f64);
            // windier to the west and north, as hub-height climatology
            let scale = 7.5 - 0.35 * (lon + 10.0) + 0.2 * (lat - 51.5);
            let shape = 2.1 + 0.05 * ((i + j) % 3) as f64;
            pts.push(GridPoint {
                lat,
                lon,
                params: WeibullParams::new(shape, scale).unwrap(),
            });
        }
    }
    GridParamField::new(pts).unwrap()
}

/// Dataset on the observation scale (m/s) with `n_times` hours.
pub fn dataset(n_times: usize, seed: u64) -> Dataset {
    let st = stations();
    let cfg = SimulationConfig {
        layout: Layout::Stations(st.clone()),
        n_times,
        t0: T0,
        mean: 2.1,
        phi: 150.0,
        sigma_z: 0.35,
        sigma_met: 0.08,
        sigma_pws1: 0.15,
        rho: 0.8,
        junk_group: vec![],
        junk_sd: 1.0,
        seed,
    };
    let sim = simulate(&cfg).unwrap();
    let values = st
        .iter()
        .enumerate()
        .map(|(s, rec)| {
            let bias = match rec.class {
                StationClass::Met => 1.0,
                StationClass::U => 0.6,
                _ => 0.75,
            };
            (0..n_times)
                .map(|t| {
                    let missing = !rec.class.is_met() && (s * 7 + t) % 23 == 0;
                    let slot = 0.25 * ((t as f64 + 9.0) * std::f64::consts::TAU / 24.0).sin();
                    (!missing).then(|| bias * (sim.obs[s][t] + slot).max(0.05).powi(2))
                })
                .collect()
        })
        .collect();
    Dataset {
        stations: st,
        t0: T0,
        n_times,
        values,
    }
}

pub fn write_fixture(dir: &Path, n_times: usize, seed: u64) -> Fixture {
    let ds = dataset(n_times, seed);
    let f = Fixture {
        dir: dir.to_path_buf(),
        stations: dir.join("stations.csv"),
        observations: dir.join("observations.csv"),
        grid: dir.join("gwa.csv"),
        coastline: dir.join("coastline.csv"),
        dataset: ds,
    };
    write_stations(&f.stations, &f.dataset.stations).unwrap();
    write_observations(&f.observations, &f.dataset).unwrap();
    write_grid(&f.grid, &grid_field()).unwrap();
    let mut coast = String::from("lat,lon\n");
    for (lat, lon) in coastline() {
        coast.push_str(&format!("{lat},{lon}\n"));
    }
    std::fs::write(&f.coastline, coast).unwrap();
    f
}
