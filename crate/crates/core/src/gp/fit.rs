//! MAP estimation of the hyperparameters with a Laplace covariance, and the
//! GLS fixed effects at the MAP.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::backend::Backend;
use crate::gp::data::GpData;
use crate::gp::hyper::{GpHyperParams, ModelSpec};
use crate::gp::likelihood::Problem;
use crate::gp::prior::Priors;
use crate::optim::{clipped_inverse, fd_hessian, minimize, BfgsConfig, Minimum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffects {
    pub beta0: f64,
    pub beta1: Option<f64>,
    /// Diurnal levels for hours 01..24 (index 0 is hour 01); sum to zero.
    pub diurnal: Option<[f64; 24]>,
}

impl FixedEffects {
    /// Mean on the model scale for covariate `x1` at diurnal slot `slot`.
    pub fn mean(&self, x1: Option<f64>, slot: usize) -> f64 {
        let mut m = self.beta0;
        if let (Some(b), Some(x)) = (self.beta1, x1) {
            m += b * x;
        }
        if let Some(d) = &self.diurnal {
            m += d[slot];
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub priors: Priors,
    pub bfgs: BfgsConfig,
    /// Multipliers applied to the prior-median scale parameters, one
    /// optimisation per entry.
    pub start_factors: Vec<f64>,
    pub backend: Backend,
    /// Compute the Laplace covariance at the MAP.
    pub laplace: bool,
    pub hessian_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            priors: Priors::default(),
            bfgs: BfgsConfig::default(),
            start_factors: vec![1.0, 0.5, 2.0],
            backend: Backend::Auto,
            laplace: true,
            hessian_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub hyper: GpHyperParams,
    pub fixed: FixedEffects,
    /// Log posterior density of θ at the MAP, fixed effects integrated out.
    pub log_posterior: f64,
    /// MAP in optimisation coordinates (log sds, log range, atanh ρ).
    pub theta: Vec<f64>,
    pub param_names: Vec<String>,
    /// Inverse finite-difference Hessian of −log posterior in θ.
    pub laplace_cov: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub n_sites: usize,
    pub n_obs: usize,
}

impl ModelFit {
    pub fn laplace_matrix(&self) -> Option<DMatrix<f64>> {
        self.laplace_cov.as_ref().map(|rows| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }

    /// Laplace standard errors of θ.
    pub fn theta_sd(&self) -> Option<Vec<f64>> {
        self.laplace_cov
            .as_ref()
            .map(|rows| rows.iter().enumerate().map(|(i, r)| r[i].max(0.0).sqrt()).collect())
    }
}

/// Starting point for a refit on closely related data (e.g. a
/// cross-validation fold).
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub theta: Vec<f64>,
    pub param_names: Vec<String>,
    pub inv_hessian: Option<DMatrix<f64>>,
}

impl WarmStart {
    pub fn from_fit(fit: &ModelFit) -> Self {
        WarmStart {
            theta: fit.theta.clone(),
            param_names: fit.param_names.clone(),
            inv_hessian: fit.laplace_matrix(),
        }
    }
}

/// The sites the model is fitted on: everything, or only Met stations.
pub fn training_data(data: &GpData, spec: &ModelSpec) -> GpData {
    if spec.reliable_only {
        data.filter_sites(|_, s| s.class.is_met())
    } else {
        data.clone()
    }
}

fn problem(data: &GpData, spec: ModelSpec, cfg: &FitConfig) -> Result<(GpData, Problem)> {
    let train = training_data(data, &spec);
    if train.n_sites() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: train.n_sites(),
        });
    }
    if train.n_times < 1 {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let prob = Problem::new(&train, spec, cfg.priors, cfg.backend)?;
    Ok((train, prob))
}

fn run(prob: &Problem, x0: &[f64], cfg: &FitConfig, h0: Option<&DMatrix<f64>>) -> Result<Minimum> {
    let (lo, hi) = prob.layout.bounds();
    minimize(|t| prob.neg_log_posterior(t), x0, &lo, &hi, &cfg.bfgs, h0)
}

fn multi_start(prob: &Problem, cfg: &FitConfig) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    let mut err: Option<Error> = None;
    for &f in &cfg.start_factors {
        let x0 = prob.layout.start(&cfg.priors, f);
        match run(prob, &x0, cfg, None) {
            Ok(m) => {
                log::debug!("start ×{f}: objective {:.6} after {} iterations", m.value, m.iterations);
                if best.as_ref().map_or(true, |b| m.value < b.value) {
                    best = Some(m);
                }
            }
            Err(e) => {
                log::debug!("start ×{f} failed: {e}");
                let better = match (&err, &e) {
                    (Some(Error::NotConverged { best: a, .. }), Error::NotConverged { best: b, .. }) => b < a,
                    (None, _) => true,
                    _ => false,
                };
                if better {
                    err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| err.unwrap_or(Error::Empty))
}

fn finish(prob: &Problem, train: &GpData, m: Minimum, cfg: &FitConfig, laplace: bool) -> Result<ModelFit> {
    let hyper = prob.hyper(&m.x);
    let marg = prob.marginal(&hyper)?;
    let laplace_cov = if laplace {
        let h = fd_hessian(|t| prob.neg_log_posterior(t), &m.x, cfg.hessian_step);
        let cov = clipped_inverse(&h, 1e-8);
        Some((0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect())
    } else {
        None
    };
    Ok(ModelFit {
        spec: prob.spec,
        hyper,
        fixed: prob.fixed_effects(&marg.coef),
        log_posterior: -m.value,
        theta: m.x,
        param_names: prob.layout.names(),
        laplace_cov,
        iterations: m.iterations,
        evaluations: m.evaluations,
        grad_norm: m.grad_norm,
        n_sites: train.n_sites(),
        n_obs: train.n_obs(),
    })
}

/// MAP fit with multi-start from scaled prior medians.
pub fn fit(data: &GpData, spec: ModelSpec, cfg: &FitConfig) -> Result<ModelFit> {
    let (train, prob) = problem(data, spec, cfg)?;
    let m = multi_start(&prob, cfg)?;
    finish(&prob, &train, m, cfg, cfg.laplace)
}

/// Single optimisation from `warm` (falling back to [`fit`] when the
/// parameter layout differs or the warm run fails). No Laplace step unless
/// `cfg.laplace` is set.
pub fn fit_warm(data: &GpData, spec: ModelSpec, cfg: &FitConfig, warm: &WarmStart) -> Result<ModelFit> {
    let (train, prob) = problem(data, spec, cfg)?;
    if prob.layout.names() == warm.param_names {
        match run(&prob, &warm.theta, cfg, warm.inv_hessian.as_ref()) {
            Ok(m) => return finish(&prob, &train, m, cfg, cfg.laplace),
            Err(e) => log::debug!("warm start failed ({e}); falling back to multi-start"),
        }
    }
    let m = multi_start(&prob, cfg)?;
    finish(&prob, &train, m, cfg, cfg.laplace)
}
