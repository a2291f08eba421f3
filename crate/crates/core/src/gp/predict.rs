//! Kriging prediction at arbitrary points and observed time indices.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::backend::{dense_covariance, krige, Backend, KrigeTarget};
use crate::gp::data::GpData;
use crate::gp::fit::{training_data, ModelFit};
use crate::gp::likelihood::{residual_column, Problem};
use crate::gp::matern::cross_covariance;
use crate::model::{StationClass, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub site_id: String,
    pub lat: f64,
    pub lon: f64,
    /// Nugget class of the quantity being predicted (Met for true wind).
    pub class: StationClass,
    pub x1: Option<f64>,
    pub times: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub site_id: String,
    pub time_index: usize,
    pub timestamp: Timestamp,
    pub mean_sqrt: f64,
    pub sd_sqrt: f64,
    /// E[W] = E[√W]² + Var[√W].
    pub mean_ms: f64,
}

fn setup(fit: &ModelFit, data: &GpData, backend: Backend) -> Result<(GpData, Problem)> {
    let train = training_data(data, &fit.spec);
    let prob = Problem::new(&train, fit.spec, Default::default(), backend)?;
    Ok((train, prob))
}

fn check_target(fit: &ModelFit, data: &GpData, t: &Target) -> Result<()> {
    if fit.spec.covariate && t.x1.is_none() {
        return Err(Error::MissingCovariate(t.site_id.clone()));
    }
    if let Some(&bad) = t.times.iter().find(|&&i| i >= data.n_times) {
        return Err(Error::InvalidConfig(alloc::format!(
            "time index {bad} beyond the {} observed hours",
            data.n_times
        )));
    }
    Ok(())
}

/// Conditional mean and sd of √W at each (target, time) given every
/// observation used to fit (all sites, or Met only for reliable-only fits).
/// The sd includes the target class's nugget; fixed-effect uncertainty is
/// not propagated.
pub fn predict(fit: &ModelFit, data: &GpData, targets: &[Target], backend: Backend) -> Result<Vec<Prediction>> {
    for t in targets {
        check_target(fit, data, t)?;
    }
    let (train, prob) = setup(fit, data, backend)?;
    let h = &fit.hyper;
    let pts = train.points();
    let ktargets: Vec<KrigeTarget> = targets
        .iter()
        .map(|t| KrigeTarget {
            cstar: cross_covariance((t.lat, t.lon), &pts, h.phi, h.sigma_z),
            times: t.times.clone(),
        })
        .collect();
    let resid = residual_column(&train, &fit.fixed);
    let kriged = krige(backend, &prob.cov_params(h), &prob.geometry(), &resid, &ktargets)?;
    let mut out = Vec::with_capacity(targets.iter().map(|t| t.times.len()).sum());
    for (t, rows) in targets.iter().zip(kriged) {
        let nug = h.nugget_sd(t.class).powi(2);
        for (&ti, k) in t.times.iter().zip(rows) {
            let mean = fit.fixed.mean(t.x1, train.hour_slot(ti)) + k.mean_adj;
            let var = k.latent_var + nug;
            out.push(Prediction {
                site_id: t.site_id.clone(),
                time_index: ti,
                timestamp: train.timestamp(ti),
                mean_sqrt: mean,
                sd_sqrt: var.sqrt(),
                mean_ms: mean * mean + var,
            });
        }
    }
    Ok(out)
}

/// Weight of every observation in the conditional mean at (`target`,
/// `time`), as `(site index, time index, weight)` over the training data.
/// Uses the dense covariance, so it is meant for small problems.
pub fn kriging_weights(fit: &ModelFit, data: &GpData, target: &Target, time: usize) -> Result<Vec<(usize, usize, f64)>> {
    check_target(fit, data, target)?;
    let (train, prob) = setup(fit, data, Backend::Dense)?;
    let h = &fit.hyper;
    let cp = prob.cov_params(h);
    let geo = prob.geometry();
    let cstar = cross_covariance((target.lat, target.lon), &train.points(), h.phi, h.sigma_z);
    let obs: Vec<(usize, usize)> = (0..geo.nt)
        .flat_map(|t| (0..geo.n).map(move |s| (t, s)))
        .filter(|&(t, s)| geo.mask[t * geo.n + s])
        .collect();
    let k = DVector::from_iterator(
        obs.len(),
        obs.iter().map(|&(t, s)| {
            let r = if t == time { 1.0 } else { cp.rho.powi(t.abs_diff(time) as i32) };
            r * cstar[s]
        }),
    );
    let ch = dense_covariance(&cp, &geo).cholesky().ok_or(Error::NotPositiveDefinite)?;
    let w = ch.solve(&k);
    Ok(obs.iter().zip(w.iter()).map(|(&(t, s), &v)| (s, t, v)).collect())
}

/// Regular lat/lon grid, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.lat_max >= self.lat_min && self.lon_max >= self.lon_min) {
            return Err(Error::InvalidConfig("grid needs step > 0 and max ≥ min".into()));
        }
        Ok(())
    }

    fn count(lo: f64, hi: f64, step: f64) -> usize {
        ((hi - lo) / step + 1e-9).floor() as usize + 1
    }

    /// Nodes in row-major order (latitude outer).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let nl = Self::count(self.lat_min, self.lat_max, self.step);
        let nm = Self::count(self.lon_min, self.lon_max, self.step);
        let mut v = Vec::with_capacity(nl * nm);
        for i in 0..nl {
            for j in 0..nm {
                v.push((self.lat_min + i as f64 * self.step, self.lon_min + j as f64 * self.step));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPrediction {
    pub lat: f64,
    pub lon: f64,
    pub time_index: usize,
    pub timestamp: Timestamp,
    /// `None` where the covariate field does not cover the node.
    pub prediction: Option<(f64, f64, f64)>,
}

/// Predict true (Met-class) wind at every grid node and requested time.
/// `x1` supplies the covariate at a node; nodes it does not cover are
/// reported as missing when the model uses the covariate.
pub fn predict_grid<F: Fn(f64, f64) -> Option<f64>>(
    fit: &ModelFit,
    data: &GpData,
    grid: &GridSpec,
    times: &[usize],
    x1: F,
    backend: Backend,
) -> Result<Vec<GridPrediction>> {
    grid.validate()?;
    let nodes = grid.nodes();
    let mut targets = Vec::new();
    let mut covered = Vec::with_capacity(nodes.len());
    for (i, &(lat, lon)) in nodes.iter().enumerate() {
        let x = x1(lat, lon);
        let ok = !fit.spec.covariate || x.is_some();
        covered.push(ok);
        if ok {
            targets.push(Target {
                site_id: alloc::format!("node{i}"),
                lat,
                lon,
                class: StationClass::Met,
                x1: x,
                times: times.to_vec(),
            });
        }
    }
    let preds = predict(fit, data, &targets, backend)?;
    let mut it = preds.into_iter();
    let mut out = Vec::with_capacity(nodes.len() * times.len());
    for (&(lat, lon), ok) in nodes.iter().zip(covered) {
        for &t in times {
            let prediction = if ok {
                let p = it.next().expect("one prediction per covered node and time");
                Some((p.mean_sqrt, p.sd_sqrt, p.mean_ms))
            } else {
                None
            };
            out.push(GridPrediction {
                lat,
                lon,
                time_index: t,
                timestamp: data.timestamp(t),
                prediction,
            });
        }
    }
    Ok(out)
}
