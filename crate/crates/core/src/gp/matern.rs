//! Matérn ν = 1 covariance with the effective-range parameterisation
//! κ = √8 / φ.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::geo::haversine_km;
use crate::special::bessel_k1;

pub const SQRT8: f64 = 2.828_427_124_746_190_1;

pub fn kappa(phi: f64) -> f64 {
    SQRT8 / phi
}

/// Matérn correlation ρ(h) = κh·K₁(κh), with ρ(0) = 1.
pub fn matern_nu1_corr(h: f64, phi: f64) -> f64 {
    let x = kappa(phi) * h;
    if x <= 0.0 {
        return 1.0;
    }
    if x > 700.0 {
        return 0.0;
    }
    // x·K1(x) → 1 as x → 0; the series is accurate down to tiny x
    (x * bessel_k1(x)).min(1.0)
}

pub fn matern_nu1(h: f64, phi: f64, sigma_z: f64) -> f64 {
    sigma_z * sigma_z * matern_nu1_corr(h, phi)
}

/// Pairwise great-circle distances (km) between (lat, lon) points.
pub fn distance_matrix(points: &[(f64, f64)]) -> DMatrix<f64> {
    let n = points.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = haversine_km(points[i].0, points[i].1, points[j].0, points[j].1);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Spatial covariance matrix with the 1e-10·σ²_z diagonal jitter.
pub fn covariance_matrix(dist: &DMatrix<f64>, phi: f64, sigma_z: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    let s2 = sigma_z * sigma_z;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = s2 * (1.0 + 1e-10);
        for j in 0..i {
            let v = s2 * matern_nu1_corr(dist[(i, j)], phi);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Cross-covariance between one target point and each data site.
pub fn cross_covariance(target: (f64, f64), sites: &[(f64, f64)], phi: f64, sigma_z: f64) -> Vec<f64> {
    sites
        .iter()
        .map(|s| matern_nu1(haversine_km(target.0, target.1, s.0, s.1), phi, sigma_z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn limits_and_range() {
        assert_eq!(matern_nu1(0.0, 200.0, 0.7), 0.7 * 0.7);
        // sqrt(8) K1(sqrt(8)) from a 30-digit evaluation
        assert_relative_eq!(matern_nu1_corr(200.0, 200.0), 0.139_667_474_015_293_14, max_relative = 1e-13);
        assert_relative_eq!(matern_nu1(1e-9, 200.0, 1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_decreasing() {
        let phi = 150.0;
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let v = matern_nu1(5.0 * phi * i as f64 / 100.0, phi, 1.3);
            assert!(v < prev);
            prev = v;
        }
    }
}
