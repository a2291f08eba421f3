//! The `fit.json` artifact and the glue between files and the core model:
//! training-data assembly, covariates at new points, target grouping and
//! prediction scoring.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use windfuse_core::bias::{run_bias_correction, Calibrator, GridParamField};
use windfuse_core::eval::{crps_gaussian, extreme_metrics, rmse, ScoreReport, StationScore};
use windfuse_core::geo::distance_to_polyline_km;
use windfuse_core::gp::{GpData, ModelFit, ModelSpec, Target};
use windfuse_core::model::HOUR;
use windfuse_core::{Dataset, StationClass, WindSeries};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::io::{PredictionRow, TargetRow};
use crate::time::parse_timestamp;

pub const FORMAT_VERSION: u32 = 1;

/// Everything `predict` needs: the fitted model, the observations it
/// conditions on, and the calibration that supplies X₁ at new sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ModelConfig,
    pub model_fit: ModelFit,
    /// Training data on the √wind scale.
    pub training: GpData,
    pub calibrator: Option<Calibrator>,
    pub coastline: Option<Vec<(f64, f64)>>,
}

impl FitArtifact {
    pub fn check_version(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "fit artifact format {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        Ok(())
    }

    /// X₁ at a new point, when the model uses it. An explicit `dist_km`
    /// wins over the stored coastline.
    pub fn covariate_at(&self, lat: f64, lon: f64, dist_km: Option<f64>) -> Result<Option<f64>> {
        if !self.model_fit.spec.covariate {
            return Ok(None);
        }
        let cal = self
            .calibrator
            .as_ref()
            .ok_or_else(|| Error::Invalid("model uses X1 but the artifact has no calibration".into()))?;
        let dist = match (dist_km, &self.coastline) {
            (Some(d), _) => d,
            (None, Some(c)) => distance_to_polyline_km(lat, lon, c),
            (None, None) if !self.config.bias.use_dist => 0.0,
            (None, None) => {
                return Err(Error::Invalid(format!(
                    "no distance to sea for ({lat}, {lon}): give a dist_to_sea_km or x1 column"
                )))
            }
        };
        Ok(Some(cal.x1_at(lat, lon, dist)?))
    }

    /// Group target rows by site into core targets. Rows of one site must
    /// agree on location, class and covariate.
    pub fn targets(&self, rows: &[TargetRow]) -> Result<Vec<Target>> {
        let data = &self.training;
        let mut order: Vec<String> = Vec::new();
        let mut by_site: HashMap<String, Target> = HashMap::new();
        for r in rows {
            let ts = parse_timestamp(&r.timestamp)?;
            let off = ts - data.t0;
            if off % HOUR != 0 || off < 0 || (off / HOUR) as usize >= data.n_times {
                return Err(Error::Invalid(format!(
                    "target {} at {}: not one of the {} fitted hours",
                    r.site_id, r.timestamp, data.n_times
                )));
            }
            let t = (off / HOUR) as usize;
            let class = match r.class.as_deref() {
                None | Some("") => StationClass::Met,
                Some(c) => c.parse()?,
            };
            let x1 = match r.x1 {
                Some(x) => Some(x),
                None => self.covariate_at(r.lat, r.lon, r.dist_to_sea_km)?,
            };
            match by_site.get_mut(&r.site_id) {
                Some(tg) => {
                    if tg.lat != r.lat || tg.lon != r.lon || tg.class != class || tg.x1 != x1 {
                        return Err(Error::Invalid(format!("target rows for {} disagree on location, class or x1", r.site_id)));
                    }
                    tg.times.push(t);
                }
                None => {
                    order.push(r.site_id.clone());
                    by_site.insert(
                        r.site_id.clone(),
                        Target {
                            site_id: r.site_id.clone(),
                            lat: r.lat,
                            lon: r.lon,
                            class,
                            x1,
                            times: vec![t],
                        },
                    );
                }
            }
        }
        Ok(order.into_iter().map(|id| by_site.remove(&id).expect("grouped above")).collect())
    }
}

/// Training data on the √wind scale from the corrected values, with X₁
/// taken from a bias-correction run on the raw ones when a grid is given.
pub fn training_data(
    raw: &Dataset,
    corrected: &Dataset,
    grid: Option<&GridParamField>,
    coastline: Option<&[(f64, f64)]>,
    spec: &ModelSpec,
    cfg: &ModelConfig,
) -> Result<(GpData, Option<Calibrator>)> {
    match grid {
        Some(field) => {
            let bc = run_bias_correction(raw, field, coastline, &cfg.bias)?;
            let x1 = bc.x1();
            Ok((GpData::from_wind(corrected, Some(&x1))?, Some(bc.calibrator)))
        }
        None if spec.covariate => Err(Error::Invalid(format!("model `{spec}` uses X1, which needs --grid"))),
        None => Ok((GpData::from_wind(corrected, None)?, None)),
    }
}

/// Score predictions against observed wind: RMSE of E[W] in m/s, Gaussian
/// CRPS on √W. Predictions without a matching observation are ignored.
pub fn evaluate_predictions(
    model_id: &str,
    preds: &[PredictionRow],
    truth: &[WindSeries],
    extreme_percentiles: &[f64],
) -> Result<ScoreReport> {
    let mut obs: HashMap<(&str, i64), f64> = HashMap::new();
    for s in truth {
        for (t, v) in s.values.iter().enumerate() {
            if let Some(v) = v {
                obs.insert((s.station_id.as_str(), s.t0 + t as i64 * HOUR), *v);
            }
        }
    }
    let mut per_site: BTreeMap<&str, (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let (mut pred, mut tru, mut crps) = (Vec::new(), Vec::new(), Vec::new());
    for p in preds {
        let ts = parse_timestamp(&p.timestamp)?;
        let Some(&w) = obs.get(&(p.site_id.as_str(), ts)) else {
            continue;
        };
        if w < 0.0 {
            return Err(Error::Invalid(format!("negative observed wind for {} at {}", p.site_id, p.timestamp)));
        }
        let c = crps_gaussian(p.mean_sqrt, p.sd_sqrt, w.sqrt())?;
        let e = per_site.entry(p.site_id.as_str()).or_default();
        e.0.push(p.mean_ms);
        e.1.push(w);
        e.2.push(c);
        pred.push(p.mean_ms);
        tru.push(w);
        crps.push(c);
    }
    if pred.is_empty() {
        return Err(Error::Invalid("no prediction matches an observation by site_id and timestamp".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let per_station = per_site
        .into_iter()
        .map(|(id, (p, t, c))| {
            Ok(StationScore {
                station_id: id.to_string(),
                n: p.len(),
                rmse: rmse(&p, &t)?,
                crps: mean(&c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let extreme = if pred.len() >= 100 {
        extreme_metrics(&pred, &tru, extreme_percentiles)?
    } else {
        log::warn!("{} matched pairs; extreme-percentile metrics need at least 100", pred.len());
        Vec::new()
    };
    Ok(ScoreReport {
        model_id: model_id.to_string(),
        rmse: rmse(&pred, &tru)?,
        crps_sqrt: mean(&crps),
        n_folds: per_station.len(),
        per_station,
        extreme,
        failures: Vec::new(),
        complete: true,
        full_fit: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_zero_rmse() {
        let truth = vec![WindSeries::new("a", 1_717_200_000, vec![Some(4.0), None, Some(9.0)])];
        let preds: Vec<PredictionRow> = [(0, 4.0), (1, 5.0), (2, 9.0)]
            .into_iter()
            .map(|(h, w)| PredictionRow {
                site_id: "a".into(),
                timestamp: crate::time::format_timestamp(1_717_200_000 + h * HOUR),
                mean_sqrt: f64::sqrt(w),
                sd_sqrt: 0.1,
                mean_ms: w,
            })
            .collect();
        let r = evaluate_predictions("m", &preds, &truth, &[]).unwrap();
        assert_eq!(r.per_station[0].n, 2);
        assert_eq!(r.rmse, 0.0);
        let c0 = crps_gaussian(0.0, 0.1, 0.0).unwrap();
        assert!((r.crps_sqrt - c0).abs() < 1e-12);
    }
}
