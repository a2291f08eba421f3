//! Scale calibration: penalised cubic B-spline in the gridded scale plus a
//! linear distance-to-sea term, smoothing chosen by generalised
//! cross-validation.
//!
//! Knots are equally spaced and extend three intervals beyond the data
//! range, so the second-difference penalty leaves straight lines
//! unpenalised. Outside the data range the smooth continues linearly.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bias::calib::CalibRow;
use crate::error::{Error, Result};
use crate::optim::golden_section;

const ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    /// Mean of the spline over the training points.
    pub beta0: f64,
    pub knots: Vec<f64>,
    pub coef: Vec<f64>,
    pub lambda: f64,
    pub beta_dist: f64,
    pub use_dist: bool,
    /// Residual sd (RSS over residual degrees of freedom).
    pub sigma: f64,
    /// Effective degrees of freedom, trace of the hat matrix.
    pub edf: f64,
    pub gcv: f64,
    pub x_range: (f64, f64),
}

fn uniform_knots(lo: f64, hi: f64, n_basis: usize) -> Vec<f64> {
    let h = (hi - lo) / (n_basis - (ORDER - 1)) as f64;
    (0..n_basis + ORDER).map(|i| lo + (i as f64 - 3.0) * h).collect()
}

/// All B-splines of order `m` at `x` (Cox–de Boor).
fn basis_order(knots: &[f64], m: usize, x: f64) -> Vec<f64> {
    let nk = knots.len();
    let mut b: Vec<f64> = (0..nk - 1)
        .map(|i| if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 })
        .collect();
    for k in 2..=m {
        let mut nb = vec![0.0; nk - k];
        for i in 0..nk - k {
            let left = (x - knots[i]) / (knots[i + k - 1] - knots[i]) * b[i];
            let right = (knots[i + k] - x) / (knots[i + k] - knots[i + 1]) * b[i + 1];
            nb[i] = left + right;
        }
        b = nb;
    }
    b
}

fn basis(knots: &[f64], x: f64) -> Vec<f64> {
    basis_order(knots, ORDER, x)
}

fn basis_deriv(knots: &[f64], x: f64) -> Vec<f64> {
    let b3 = basis_order(knots, ORDER - 1, x);
    let n = knots.len() - ORDER;
    (0..n)
        .map(|i| {
            3.0 * (b3[i] / (knots[i + 3] - knots[i]) - b3[i + 1] / (knots[i + 4] - knots[i + 1]))
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ScaleCalibration {
    fn spline(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let edge = if x < lo {
            lo
        } else if x > hi {
            hi
        } else {
            return dot(&basis(&self.knots, x), &self.coef);
        };
        dot(&basis(&self.knots, edge), &self.coef) + dot(&basis_deriv(&self.knots, edge), &self.coef) * (x - edge)
    }

    /// Centred smooth s(x): spline minus `beta0`.
    pub fn smooth(&self, x: f64) -> f64 {
        self.spline(x) - self.beta0
    }

    pub fn predict(&self, gwa_scale: f64, dist_km: f64) -> f64 {
        let d = if self.use_dist { self.beta_dist * dist_km } else { 0.0 };
        self.spline(gwa_scale) + d
    }
}

struct Design {
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    y: DVector<f64>,
    pen: DMatrix<f64>,
}

struct Solved {
    coef: DVector<f64>,
    rss: f64,
    edf: f64,
}

impl Design {
    fn solve(&self, lambda: f64) -> Option<Solved> {
        let a = &self.xtx + &self.pen * lambda;
        let ch = a.cholesky()?;
        let coef = ch.solve(&self.xty);
        let r = &self.y - &self.x * &coef;
        let edf = ch.solve(&self.xtx).trace();
        let out = Solved {
            coef,
            rss: r.norm_squared(),
            edf,
        };
        (out.rss.is_finite() && out.edf.is_finite()).then_some(out)
    }

    fn gcv(&self, lambda: f64) -> f64 {
        let n = self.y.len() as f64;
        match self.solve(lambda) {
            Some(s) if s.edf < n - 1e-9 => n * s.rss / (n - s.edf).powi(2),
            _ => f64::INFINITY,
        }
    }
}

/// Default scale calibration: 6 basis functions, distance term, GCV.
pub fn fit_scale_calibration(rows: &[CalibRow]) -> Result<ScaleCalibration> {
    fit_scale_calibration_with(rows, 6, true, None)
}

/// Scale calibration with explicit basis size, optional distance term and
/// optional fixed smoothing parameter (GCV when `None`).
pub fn fit_scale_calibration_with(
    rows: &[CalibRow],
    n_basis: usize,
    use_dist: bool,
    lambda: Option<f64>,
) -> Result<ScaleCalibration> {
    if n_basis < ORDER {
        return Err(Error::InvalidParameter {
            name: "n_basis",
            value: n_basis as f64,
        });
    }
    let need = (n_basis + 2).max(8);
    if rows.len() < need {
        return Err(Error::TooFewObservations {
            needed: need,
            got: rows.len(),
        });
    }
    let lo = rows.iter().map(|r| r.gwa).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.gwa).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateDesign("constant regressor"));
    }
    let knots = uniform_knots(lo, hi, n_basis);
    let p = n_basis + usize::from(use_dist);
    let n = rows.len();
    let x = DMatrix::from_fn(n, p, |i, j| {
        if j < n_basis {
            basis(&knots, rows[i].gwa)[j]
        } else {
            rows[i].dist_km
        }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.met));
    let mut d2 = DMatrix::zeros(n_basis - 2, n_basis);
    for i in 0..n_basis - 2 {
        d2[(i, i)] = 1.0;
        d2[(i, i + 1)] = -2.0;
        d2[(i, i + 2)] = 1.0;
    }
    let mut pen = DMatrix::zeros(p, p);
    pen.view_mut((0, 0), (n_basis, n_basis)).copy_from(&(d2.transpose() * &d2));
    let des = Design {
        xtx: x.transpose() * &x,
        xty: x.transpose() * &y,
        x,
        y,
        pen,
    };
    // λ on a scale relative to the data so the search range is unit free
    let scale = des.xtx.trace() / des.pen.trace();
    let lam = match lambda {
        Some(l) => l,
        None => {
            let f = |u: f64| des.gcv(scale * 10f64.powf(u));
            let mut best = (f64::INFINITY, 0.0);
            let mut u = -8.0;
            while u <= 6.0 + 1e-9 {
                let v = f(u);
                if v < best.0 {
                    best = (v, u);
                }
                u += 0.25;
            }
            if best.0.is_finite() {
                let u = golden_section(f, best.1 - 0.25, best.1 + 0.25, 1e-4);
                let u = if f(u) <= best.0 { u } else { best.1 };
                scale * 10f64.powf(u)
            } else {
                log::warn!("GCV failed for every smoothing parameter; using a mid-range value");
                scale
            }
        }
    };
    let sol = des.solve(lam).ok_or(Error::DegenerateDesign("singular penalised system"))?;
    let coef: Vec<f64> = sol.coef.iter().take(n_basis).copied().collect();
    let beta_dist = if use_dist { sol.coef[n_basis] } else { 0.0 };
    let beta0 = rows.iter().map(|r| dot(&basis(&knots, r.gwa), &coef)).sum::<f64>() / n as f64;
    let dof = (n as f64 - sol.edf).max(1e-12);
    Ok(ScaleCalibration {
        beta0,
        knots,
        coef,
        lambda: lam,
        beta_dist,
        use_dist,
        sigma: (sol.rss / dof).sqrt(),
        edf: sol.edf,
        gcv: n as f64 * sol.rss / (dof * dof),
        x_range: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows<F: Fn(f64, f64) -> f64>(n: usize, f: F) -> Vec<CalibRow> {
        (0..n)
            .map(|i| {
                let g = 4.0 + 5.0 * i as f64 / (n - 1) as f64 + 0.1 * ((i * 7) as f64).sin();
                let d = 2.0 + 40.0 * (((i * 13) % n) as f64 / n as f64);
                CalibRow {
                    gwa: g,
                    dist_km: d,
                    met: f(g, d),
                }
            })
            .collect()
    }

    #[test]
    fn partition_of_unity_inside_range() {
        let k = uniform_knots(2.0, 5.0, 6);
        for x in [2.0, 2.7, 3.9, 5.0] {
            assert_relative_eq!(basis(&k, x).iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_data_recovered() {
        let r = rows(23, |g, _| -1.5 + 1.1 * g);
        let c = fit_scale_calibration(&r).unwrap();
        for row in &r {
            assert!((c.predict(row.gwa, row.dist_km) - row.met).abs() < 1e-6);
        }
        assert!(c.beta_dist.abs() < 1e-8);
        // linear beyond the boundary
        assert_relative_eq!(c.predict(12.0, 0.0), -1.5 + 1.1 * 12.0, epsilon = 1e-6);
    }

    #[test]
    fn intercept_equivariance() {
        let f = |g: f64, d: f64| 0.3 * g * g - 2.0 * g + 0.01 * d + 0.05 * (g * 3.0).sin();
        let a = fit_scale_calibration(&rows(23, f)).unwrap();
        let b = fit_scale_calibration(&rows(23, |g, d| f(g, d) + 2.5)).unwrap();
        for g in [4.0, 6.5, 9.0] {
            assert_relative_eq!(b.predict(g, 10.0) - a.predict(g, 10.0), 2.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn noise_gives_flat_smooth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = rows(40, |_, _| 0.0);
        for row in &mut r {
            row.met = 6.0 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let c = fit_scale_calibration_with(&r, 6, false, None).unwrap();
        let vals: Vec<f64> = r.iter().map(|row| c.smooth(row.gwa)).collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < c.sigma, "spread {spread} sigma {}", c.sigma);
    }

    #[test]
    fn residual_sum_grows_with_smoothing() {
        let r = rows(23, |g, d| (g - 6.0).powi(3) * 0.2 + 0.02 * d);
        let mut prev = 0.0;
        for l in [1e-6, 1e-3, 1.0, 1e3] {
            let c = fit_scale_calibration_with(&r, 6, true, Some(l)).unwrap();
            let rss: f64 = r.iter().map(|row| (c.predict(row.gwa, row.dist_km) - row.met).powi(2)).sum();
            assert!(rss >= prev - 1e-12);
            prev = rss;
        }
    }

    #[test]
    fn degenerate_inputs() {
        let r = rows(23, |_, _| 1.0);
        let constant: Vec<CalibRow> = r.iter().map(|x| CalibRow { gwa: 5.0, ..*x }).collect();
        assert!(matches!(fit_scale_calibration(&constant), Err(Error::DegenerateDesign(_))));
        assert!(fit_scale_calibration(&r[..5]).is_err());
    }
}
