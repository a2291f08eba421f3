//! Leave-one-station-out cross-validation.
//!
//! Each fold drops one station of the held-out class, refits on the rest
//! (warm-started from the all-data fit) and predicts that station at every
//! hour it observed. Folds are independent, so the caller chooses how to run
//! them through an [`Executor`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::scores::{crps_gaussian, extreme_metrics, rmse, ExtremeMetric};
use crate::exec::Executor;
use crate::gp::fit::{fit, fit_warm, FitConfig, WarmStart};
use crate::gp::hyper::{GpHyperParams, ModelSpec, NoiseGrouping, Variant};
use crate::gp::predict::{predict, Target};
use crate::gp::GpData;
use crate::model::StationClass;

/// Scale on which RMSE is computed. CRPS is always on the model scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreScale {
    /// Data are Gaussian on the model scale (simulations): RMSE of the mean.
    Model,
    /// The model scale is √wind: RMSE of E[W] against observed wind (m/s).
    SqrtWind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosocvConfig {
    pub fit: FitConfig,
    pub held_out_class: StationClass,
    pub scale: ScoreScale,
    /// Warm-start folds from the all-data fit.
    pub warm_start: bool,
    pub extreme_percentiles: Vec<f64>,
}

impl Default for LosocvConfig {
    fn default() -> Self {
        LosocvConfig {
            fit: FitConfig::default(),
            held_out_class: StationClass::Met,
            scale: ScoreScale::SqrtWind,
            warm_start: true,
            extreme_percentiles: alloc::vec![1.0, 2.5, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub time_index: usize,
    /// Point prediction on the RMSE scale.
    pub pred: f64,
    /// Observation on the RMSE scale.
    pub truth: f64,
    pub mean_sqrt: f64,
    pub sd_sqrt: f64,
    pub crps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutput {
    pub station_id: String,
    pub points: Vec<ScoredPoint>,
    pub hyper: GpHyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub station_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationScore {
    pub station_id: String,
    pub n: usize,
    pub rmse: f64,
    pub crps: f64,
}

/// Aggregate over successful folds. `rmse` and `crps_sqrt` are NaN when no
/// fold succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model_id: String,
    pub rmse: f64,
    pub crps_sqrt: f64,
    pub per_station: Vec<StationScore>,
    pub extreme: Vec<ExtremeMetric>,
    pub n_folds: usize,
    pub failures: Vec<FoldFailure>,
    /// Every fold succeeded.
    pub complete: bool,
    /// Hyperparameters of the all-data fit, when it succeeded.
    pub full_fit: Option<GpHyperParams>,
}

/// Indices of the stations to hold out (all of the held-out class).
pub fn losocv_plan(data: &GpData, cfg: &LosocvConfig) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..data.n_sites())
        .filter(|&i| data.sites[i].class == cfg.held_out_class)
        .collect();
    if idx.len() < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: idx.len(),
        });
    }
    Ok(idx)
}

/// Refit without station `site` and score predictions at it.
pub fn losocv_fold(
    data: &GpData,
    spec: ModelSpec,
    site: usize,
    warm: Option<&WarmStart>,
    cfg: &LosocvConfig,
) -> Result<FoldOutput> {
    let st = &data.sites[site];
    let times: Vec<usize> = (0..data.n_times).filter(|&t| data.y[site][t].is_some()).collect();
    if times.is_empty() {
        return Err(Error::EmptySeries(st.id.clone()));
    }
    let train = data.without_site(site);
    let mut fc = cfg.fit.clone();
    fc.laplace = false;
    let f = match warm {
        Some(w) => fit_warm(&train, spec, &fc, w)?,
        None => fit(&train, spec, &fc)?,
    };
    let target = Target {
        site_id: st.id.clone(),
        lat: st.lat,
        lon: st.lon,
        class: st.class,
        x1: st.x1,
        times: times.clone(),
    };
    let preds = predict(&f, &train, &[target], fc.backend)?;
    let mut points = Vec::with_capacity(preds.len());
    for p in preds {
        let y = data.y[site][p.time_index].expect("observed time");
        let (pred, truth) = match cfg.scale {
            ScoreScale::Model => (p.mean_sqrt, y),
            ScoreScale::SqrtWind => (p.mean_ms, y * y),
        };
        points.push(ScoredPoint {
            time_index: p.time_index,
            pred,
            truth,
            mean_sqrt: p.mean_sqrt,
            sd_sqrt: p.sd_sqrt,
            crps: crps_gaussian(p.mean_sqrt, p.sd_sqrt.max(1e-12), y)?,
        });
    }
    Ok(FoldOutput {
        station_id: st.id.clone(),
        points,
        hyper: f.hyper,
    })
}

/// Pool fold outputs into a report (fold order is preserved).
pub fn aggregate(
    model_id: &str,
    folds: Vec<(String, Result<FoldOutput>)>,
    full_fit: Option<GpHyperParams>,
    cfg: &LosocvConfig,
) -> ScoreReport {
    let n_folds = folds.len();
    let mut per_station = Vec::new();
    let mut failures = Vec::new();
    let (mut pred, mut truth, mut crps) = (Vec::new(), Vec::new(), Vec::new());
    for (id, r) in folds {
        match r {
            Ok(out) => {
                let p: Vec<f64> = out.points.iter().map(|q| q.pred).collect();
                let t: Vec<f64> = out.points.iter().map(|q| q.truth).collect();
                let c: Vec<f64> = out.points.iter().map(|q| q.crps).collect();
                per_station.push(StationScore {
                    station_id: id,
                    n: p.len(),
                    rmse: rmse(&p, &t).unwrap_or(f64::NAN),
                    crps: c.iter().sum::<f64>() / c.len().max(1) as f64,
                });
                pred.extend(p);
                truth.extend(t);
                crps.extend(c);
            }
            Err(e) => failures.push(FoldFailure {
                station_id: id,
                error: e.to_string(),
            }),
        }
    }
    let extreme = if pred.len() >= 100 {
        extreme_metrics(&pred, &truth, &cfg.extreme_percentiles).unwrap_or_default()
    } else {
        Vec::new()
    };
    ScoreReport {
        model_id: model_id.to_string(),
        rmse: rmse(&pred, &truth).unwrap_or(f64::NAN),
        crps_sqrt: if crps.is_empty() {
            f64::NAN
        } else {
            crps.iter().sum::<f64>() / crps.len() as f64
        },
        per_station,
        extreme,
        n_folds,
        complete: failures.is_empty(),
        failures,
        full_fit,
    }
}

/// Cross-validate one model specification.
pub fn losocv_model<E: Executor>(data: &GpData, spec: ModelSpec, cfg: &LosocvConfig, exec: &E) -> Result<ScoreReport> {
    let plan = losocv_plan(data, cfg)?;
    let full = match fit(data, spec, &cfg.fit) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("all-data fit of {spec} failed: {e}");
            None
        }
    };
    let warm = full.as_ref().filter(|_| cfg.warm_start).map(WarmStart::from_fit);
    let folds = exec.map_indices(plan.len(), &|k| {
        let site = plan[k];
        (data.sites[site].id.clone(), losocv_fold(data, spec, site, warm.as_ref(), cfg))
    });
    Ok(aggregate(&spec.to_string(), folds, full.map(|f| f.hyper), cfg))
}

/// Cross-validate each specification in turn.
pub fn losocv<E: Executor>(data: &GpData, specs: &[ModelSpec], cfg: &LosocvConfig, exec: &E) -> Vec<Result<ScoreReport>> {
    specs.iter().map(|&s| losocv_model(data, s, cfg, exec)).collect()
}

/// Pooled-nugget and per-class-nugget cross-validation on data where one
/// group (usually U) was left uncorrected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncorrectedReport {
    pub group: StationClass,
    pub pooled: ScoreReport,
    pub grouped: ScoreReport,
}

impl UncorrectedReport {
    /// σ̂_group / σ̂_Met in the grouped all-data fit.
    pub fn sigma_ratio(&self) -> Option<f64> {
        self.grouped
            .full_fit
            .map(|h| h.nugget_sd(self.group) / h.nugget_sd(StationClass::Met))
    }
}

pub fn uncorrected_group_experiment<E: Executor>(
    data: &GpData,
    variant: Variant,
    group: StationClass,
    cfg: &LosocvConfig,
    exec: &E,
) -> Result<UncorrectedReport> {
    if !data.sites.iter().any(|s| s.class == group) {
        return Err(Error::InvalidConfig(alloc::format!("no {group} stations in the data")));
    }
    let pooled = losocv_model(data, ModelSpec::new(variant, NoiseGrouping::Pooled), cfg, exec)?;
    let grouped = losocv_model(data, ModelSpec::new(variant, NoiseGrouping::PerClass), cfg, exec)?;
    Ok(UncorrectedReport { group, pooled, grouped })
}
