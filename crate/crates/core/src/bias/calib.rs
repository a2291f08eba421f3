//! Calibration of gridded Weibull parameters against station fits, and the
//! leave-one-out comparison of candidate calibration models.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bias::spline::{fit_scale_calibration_with, ScaleCalibration};
use crate::error::{Error, Result};

/// One station: gridded parameter, distance to the sea and the station's
/// own maximum-likelihood parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibRow {
    pub gwa: f64,
    pub dist_km: f64,
    pub met: f64,
}

/// k̂ = β₀ + β₁·k_grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeCalibration {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma_k: f64,
}

impl ShapeCalibration {
    pub fn predict(&self, gwa_shape: f64) -> f64 {
        self.beta0 + self.beta1 * gwa_shape
    }
}

/// Ordinary least squares; returns coefficients and residual sum of squares.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let ch = (x.transpose() * x)
        .cholesky()
        .ok_or(Error::DegenerateDesign("collinear regressors"))?;
    let b = ch.solve(&(x.transpose() * y));
    let rss = (y - x * &b).norm_squared();
    Ok((b, rss))
}

fn check_spread(v: impl Iterator<Item = f64>) -> Result<()> {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi > lo {
        Ok(())
    } else {
        Err(Error::DegenerateDesign("constant regressor"))
    }
}

/// OLS of the station shape on the gridded shape; `pairs` are
/// `(k_grid, k_station)`.
pub fn fit_shape_calibration(pairs: &[(f64, f64)]) -> Result<ShapeCalibration> {
    if pairs.len() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: pairs.len(),
        });
    }
    check_spread(pairs.iter().map(|p| p.0))?;
    let x = DMatrix::from_fn(pairs.len(), 2, |i, j| if j == 0 { 1.0 } else { pairs[i].0 });
    let y = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
    let (b, rss) = ols(&x, &y)?;
    Ok(ShapeCalibration {
        beta0: b[0],
        beta1: b[1],
        sigma_k: (rss / (pairs.len() - 2).max(1) as f64).sqrt(),
    })
}

/// Candidate calibration models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibModel {
    /// Use the gridded value unchanged.
    Identity,
    Linear,
    LinearDist,
    Spline,
    SplineDist,
}

impl CalibModel {
    pub const ALL: [CalibModel; 5] = [
        CalibModel::Identity,
        CalibModel::Linear,
        CalibModel::LinearDist,
        CalibModel::Spline,
        CalibModel::SplineDist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CalibModel::Identity => "identity",
            CalibModel::Linear => "linear",
            CalibModel::LinearDist => "linear+dist",
            CalibModel::Spline => "spline",
            CalibModel::SplineDist => "spline+dist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedCalibration {
    Identity,
    /// Coefficients on (1, gwa) or (1, gwa, dist).
    Linear(Vec<f64>),
    Spline(ScaleCalibration),
}

impl FittedCalibration {
    pub fn fit(model: CalibModel, rows: &[CalibRow]) -> Result<Self> {
        match model {
            CalibModel::Identity => Ok(FittedCalibration::Identity),
            CalibModel::Linear | CalibModel::LinearDist => {
                let p = if model == CalibModel::Linear { 2 } else { 3 };
                if rows.len() < p + 1 {
                    return Err(Error::TooFewObservations {
                        needed: p + 1,
                        got: rows.len(),
                    });
                }
                check_spread(rows.iter().map(|r| r.gwa))?;
                let x = DMatrix::from_fn(rows.len(), p, |i, j| match j {
                    0 => 1.0,
                    1 => rows[i].gwa,
                    _ => rows[i].dist_km,
                });
                let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.met));
                let (b, _) = ols(&x, &y)?;
                Ok(FittedCalibration::Linear(b.iter().copied().collect()))
            }
            CalibModel::Spline => Ok(FittedCalibration::Spline(fit_scale_calibration_with(rows, 6, false, None)?)),
            CalibModel::SplineDist => Ok(FittedCalibration::Spline(fit_scale_calibration_with(rows, 6, true, None)?)),
        }
    }

    pub fn predict(&self, gwa: f64, dist_km: f64) -> f64 {
        match self {
            FittedCalibration::Identity => gwa,
            FittedCalibration::Linear(b) => b[0] + b[1] * gwa + b.get(2).map_or(0.0, |c| c * dist_km),
            FittedCalibration::Spline(s) => s.predict(gwa, dist_km),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooScore {
    pub model: CalibModel,
    pub rmse: f64,
}

/// Leave-one-station-out RMSE for each candidate model.
pub fn leave_one_out_calibration(rows: &[CalibRow], models: &[CalibModel]) -> Result<Vec<LooScore>> {
    if rows.len() < 4 {
        return Err(Error::TooFewObservations {
            needed: 4,
            got: rows.len(),
        });
    }
    let mut out = Vec::with_capacity(models.len());
    for &m in models {
        let mut ss = 0.0;
        for i in 0..rows.len() {
            let train: Vec<CalibRow> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| *r)
                .collect();
            let f = FittedCalibration::fit(m, &train)?;
            let e = f.predict(rows[i].gwa, rows[i].dist_km) - rows[i].met;
            ss += e * e;
        }
        out.push(LooScore {
            model: m,
            rmse: (ss / rows.len() as f64).sqrt(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_line() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|i| (1.5 + 0.2 * i as f64, 0.5 + 1.2 * (1.5 + 0.2 * i as f64))).collect();
        let c = fit_shape_calibration(&pairs).unwrap();
        assert_relative_eq!(c.beta0, 0.5, epsilon = 1e-10);
        assert_relative_eq!(c.beta1, 1.2, epsilon = 1e-10);
        assert!(c.sigma_k < 1e-10);
        assert!(fit_shape_calibration(&pairs[..2]).is_err());
        let flat = vec![(2.0, 1.0), (2.0, 1.5), (2.0, 1.7)];
        assert!(matches!(fit_shape_calibration(&flat), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn recovers_noisy_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pairs: Vec<(f64, f64)> = (0..23)
            .map(|_| {
                let k = rng.random_range(1.4..2.6);
                (k, 0.66 + 0.90 * k + 0.13 * rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let c = fit_shape_calibration(&pairs).unwrap();
        // the intercept is less well determined; check the fitted line
        // over the data range
        for k in [1.6, 2.0, 2.4] {
            assert!((c.predict(k) - (0.66 + 0.90 * k)).abs() < 0.1);
        }
        assert!((c.sigma_k - 0.13).abs() < 0.06);
    }

    #[test]
    fn loo_identity_and_nonlinear() {
        let same: Vec<CalibRow> = (0..10)
            .map(|i| CalibRow {
                gwa: i as f64,
                dist_km: 1.0,
                met: i as f64,
            })
            .collect();
        let s = leave_one_out_calibration(&same, &[CalibModel::Identity]).unwrap();
        assert_eq!(s[0].rmse, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<CalibRow> = (0..23)
            .map(|_| {
                let g = rng.random_range(4.0..9.0);
                let d = rng.random_range(0.0..60.0);
                CalibRow {
                    gwa: g,
                    dist_km: d,
                    met: 0.25 * (g - 6.5).powi(2) + 0.8 * g - 0.02 * d + 0.05 * rng.sample::<f64, _>(StandardNormal),
                }
            })
            .collect();
        let s = leave_one_out_calibration(&rows, &CalibModel::ALL).unwrap();
        let get = |m| s.iter().find(|x| x.model == m).unwrap().rmse;
        assert!(get(CalibModel::SplineDist) < get(CalibModel::Linear));
        assert!(get(CalibModel::SplineDist) < get(CalibModel::LinearDist));
    }
}
