use windfuse_core::gp::backend::Backend;
use windfuse_core::gp::data::{diurnal_precision_unit, rw1_cyclic_structure};
use windfuse_core::gp::{GpData, GpHyperParams, ModelSpec, NoiseGrouping, Priors, Problem, Site, Variant};
use windfuse_core::StationClass;

/// Composite Simpson's rule with `n` (even) intervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Composite three-point Gauss-Legendre; never evaluates the endpoints.
fn gauss3<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let x = (0.6f64).sqrt() / 2.0;
    (0..n)
        .map(|i| {
            let c = a + (i as f64 + 0.5) * h;
            h * (5.0 * f(c - x * h) + 8.0 * f(c) + 5.0 * f(c + x * h)) / 18.0
        })
        .sum()
}

#[test]
fn tail_probabilities_by_quadrature() {
    let p = Priors::default();
    let range = simpson(|x| if x <= 0.0 { 0.0 } else { p.range.log_density(x).exp() }, 0.0, 200.0, 200_000);
    assert!((range - 0.3).abs() < 1e-6, "range {range}");

    let sz = simpson(|s| p.sigma_z.log_density(s).exp(), 0.75, 0.75 + 60.0 / p.sigma_z.lambda, 200_000);
    assert!((sz - 0.5).abs() < 1e-6, "sigma_z {sz}");

    let se = simpson(|s| p.sigma_eps.log_density(s).exp(), 0.75, 0.75 + 60.0 / p.sigma_eps.lambda, 200_000);
    assert!((se - 0.1).abs() < 1e-6, "sigma_eps {se}");

    // u = √(1 − ρ) removes the integrable spike at ρ = 1
    let f = |u: f64| p.rho.log_density(1.0 - u * u).exp() * 2.0 * u;
    let rho = gauss3(f, 0.0, 0.2f64.sqrt(), 20_000);
    assert!((rho - 0.7).abs() < 1e-6, "rho {rho}");
    let whole = gauss3(f, 0.0, 2f64.sqrt(), 20_000);
    assert!((whole - 1.0).abs() < 1e-6);
}

#[test]
fn diurnal_prior_is_rotation_invariant() {
    let q = rw1_cyclic_structure();
    for i in 0..24 {
        assert!(q.row(i).sum().abs() < 1e-15);
        for j in 0..24 {
            assert_eq!(q[(i, j)], q[((i + 5) % 24, (j + 5) % 24)]);
        }
    }
    let p = diurnal_precision_unit();
    assert!(p.clone().cholesky().is_some(), "sum-to-zero precision should be proper");
}

fn data(t0: i64) -> GpData {
    let sites: Vec<Site> = (0..4)
        .map(|i| Site {
            id: format!("s{i}"),
            lat: 53.0 + 0.3 * i as f64,
            lon: -8.0 + 0.2 * (i % 2) as f64,
            class: if i < 2 { StationClass::Met } else { StationClass::A },
            x1: None,
        })
        .collect();
    let nt = 72;
    let y = (0..4)
        .map(|s| {
            (0..nt)
                .map(|t| Some(2.0 + 0.4 * (t as f64 * 0.2618).sin() + 0.05 * ((s * 7 + t * 3) % 11) as f64))
                .collect()
        })
        .collect();
    GpData { sites, t0, n_times: nt, y }
}

#[test]
fn diurnal_levels_rotate_with_the_clock() {
    let mut spec = ModelSpec::new(Variant::Ar1, NoiseGrouping::PerClass);
    spec.diurnal = true;
    let h = GpHyperParams {
        phi: 120.0,
        sigma_z: 0.5,
        sigma_eps: [0.2, 0.3, 0.3, 0.3, 0.3],
        rho: Some(0.7),
        sigma_d: Some(0.3),
    };
    let base = 1_704_067_200;
    let a = Problem::new(&data(base), spec, Priors::default(), Backend::Auto).unwrap();
    let b = Problem::new(&data(base + 3 * 3600), spec, Priors::default(), Backend::Auto).unwrap();
    let ma = a.marginal(&h).unwrap();
    let mb = b.marginal(&h).unwrap();
    assert!((ma.loglik - mb.loglik).abs() < 1e-9);
    let da = a.fixed_effects(&ma.coef).diurnal.unwrap();
    let db = b.fixed_effects(&mb.coef).diurnal.unwrap();
    for k in 0..24 {
        assert!((da[k] - db[(k + 3) % 24]).abs() < 1e-9, "slot {k}");
    }
    assert!(da.iter().sum::<f64>().abs() < 1e-9);
}
