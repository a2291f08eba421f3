//! Marginal likelihood and posterior of the hyperparameters.
//!
//! The optimisation target integrates the fixed effects out: a flat prior on
//! the intercept and covariate coefficient and the cyclic random-walk prior
//! on the diurnal levels. With G the design, Σ the observation covariance
//! and P the diurnal prior precision,
//!
//! ```text
//! −2 log p(y | θ) = (N − p_flat) log 2π + log|Σ| + yᵀΣ⁻¹y − bᵀM⁻¹b + log|M| − log|P|
//! M = GᵀΣ⁻¹G + blockdiag(0, P),  b = GᵀΣ⁻¹y
//! ```
//!
//! and the generalised-least-squares estimate M⁻¹b gives the fixed effects.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::backend::{whiten, Backend, CovParams, Geometry};
use crate::gp::data::{design_columns, diurnal_basis, diurnal_precision_unit, GpData, DIURNAL_DIM};
use crate::gp::fit::FixedEffects;
use crate::gp::hyper::{GpHyperParams, ModelSpec, ParamLayout, Variant};
use crate::gp::matern::distance_matrix;
use crate::gp::prior::Priors;
use crate::model::StationClass;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Everything about one data set that does not depend on θ.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ModelSpec,
    pub layout: ParamLayout,
    pub priors: Priors,
    pub backend: Backend,
    n: usize,
    nt: usize,
    dist: DMatrix<f64>,
    mask: Vec<bool>,
    complete: bool,
    classes: Vec<StationClass>,
    /// Design columns followed by the observations.
    cols: Vec<Vec<f64>>,
    n_obs: usize,
    logdet_p_unit: f64,
}

/// Marginal log-likelihood and the GLS fixed-effect coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub loglik: f64,
    pub coef: Vec<f64>,
}

impl Problem {
    pub fn new(data: &GpData, spec: ModelSpec, priors: Priors, backend: Backend) -> Result<Problem> {
        let n_obs = data.n_obs();
        if data.n_sites() == 0 || n_obs == 0 {
            return Err(Error::TooFewObservations { needed: 1, got: n_obs });
        }
        let mut cols = design_columns(data, &spec)?;
        cols.push(data.y_column());
        let logdet_p_unit = if spec.diurnal {
            let ch = diurnal_precision_unit().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let l = ch.l_dirty();
            2.0 * (0..DIURNAL_DIM).map(|i| l[(i, i)].ln()).sum::<f64>()
        } else {
            0.0
        };
        Ok(Problem {
            spec,
            layout: ParamLayout::new(spec, &data.classes()),
            priors,
            backend,
            n: data.n_sites(),
            nt: data.n_times,
            dist: distance_matrix(&data.points()),
            mask: data.mask(),
            complete: data.is_complete(),
            classes: data.sites.iter().map(|s| s.class).collect(),
            cols,
            n_obs,
            logdet_p_unit,
        })
    }

    pub fn n_fixed(&self) -> usize {
        self.cols.len() - 1
    }

    fn n_flat(&self) -> usize {
        1 + usize::from(self.spec.covariate)
    }

    /// Nugget sd used for classes that have no data in this problem.
    pub fn inactive_sd(&self) -> f64 {
        self.priors.sigma_eps.median()
    }

    pub fn hyper(&self, theta: &[f64]) -> GpHyperParams {
        self.layout.to_hyper(theta, self.inactive_sd())
    }

    pub fn geometry(&self) -> Geometry<'_> {
        Geometry {
            dist: &self.dist,
            n: self.n,
            nt: self.nt,
            mask: &self.mask,
            complete: self.complete,
            ar1: self.spec.variant == Variant::Ar1,
        }
    }

    pub fn cov_params(&self, h: &GpHyperParams) -> CovParams {
        CovParams {
            phi: h.phi,
            sigma_z: h.sigma_z,
            dvar: self.classes.iter().map(|&c| h.nugget_sd(c).powi(2)).collect(),
            rho: match self.spec.variant {
                Variant::Igp => 0.0,
                Variant::Ar1 => h.rho.unwrap_or(0.0),
            },
        }
    }

    /// Marginal log-likelihood with the fixed effects integrated out.
    pub fn marginal(&self, h: &GpHyperParams) -> Result<Marginal> {
        let cp = self.cov_params(h);
        let refs: Vec<&[f64]> = self.cols.iter().map(|c| c.as_slice()).collect();
        let (logdet, gram) = whiten(self.backend, &cp, &self.geometry(), &refs)?;
        let p = self.n_fixed();
        let mut m = gram.view((0, 0), (p, p)).into_owned();
        let mut logdet_p = 0.0;
        if self.spec.diurnal {
            let sd = h.sigma_d.ok_or(Error::OutOfDomain {
                name: "sigma_d",
                value: f64::NAN,
            })?;
            let prec = diurnal_precision_unit() / (sd * sd);
            let off = p - DIURNAL_DIM;
            let mut block = m.view_mut((off, off), (DIURNAL_DIM, DIURNAL_DIM));
            block += prec;
            logdet_p = self.logdet_p_unit - DIURNAL_DIM as f64 * (sd * sd).ln();
        }
        let b = gram.view((0, p), (p, 1)).into_owned();
        let yy = gram[(p, p)];
        let ch = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let coef = ch.solve(&b);
        let quad = yy - b.dot(&coef);
        let l = ch.l_dirty();
        let logdet_m = 2.0 * (0..p).map(|i| l[(i, i)].ln()).sum::<f64>();
        let k = (self.n_obs - self.n_flat()) as f64;
        let loglik = -0.5 * (k * LN_2PI + logdet + quad + logdet_m - logdet_p);
        if !loglik.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Marginal {
            loglik,
            coef: coef.iter().copied().collect(),
        })
    }

    /// Negative log posterior density of θ (NaN where it cannot be
    /// evaluated). This is the function the optimiser minimises.
    pub fn neg_log_posterior(&self, theta: &[f64]) -> f64 {
        match self.marginal(&self.hyper(theta)) {
            Ok(m) => -(m.loglik + self.layout.log_prior(theta, &self.priors)),
            Err(_) => f64::NAN,
        }
    }

    pub fn fixed_effects(&self, coef: &[f64]) -> FixedEffects {
        let mut i = 1;
        let beta1 = self.spec.covariate.then(|| {
            i += 1;
            coef[1]
        });
        let diurnal = self.spec.diurnal.then(|| {
            let a = DVector::from_column_slice(&coef[i..i + DIURNAL_DIM]);
            let d = diurnal_basis() * a;
            let mut out = [0.0; 24];
            out.copy_from_slice(d.as_slice());
            out
        });
        FixedEffects {
            beta0: coef[0],
            beta1,
            diurnal,
        }
    }
}

/// Observations minus the fixed-effect mean, time-major, zero where missing.
pub fn residual_column(data: &GpData, fixed: &FixedEffects) -> Vec<f64> {
    let n = data.n_sites();
    let mut r = alloc::vec![0.0; n * data.n_times];
    for (s, site) in data.sites.iter().enumerate() {
        for t in 0..data.n_times {
            if let Some(y) = data.y[s][t] {
                r[t * n + s] = y - fixed.mean(site.x1, data.hour_slot(t));
            }
        }
    }
    r
}

/// Gaussian log-likelihood of the observed values for given hyperparameters
/// and fixed effects (missing entries dropped).
pub fn log_likelihood(
    hyper: &GpHyperParams,
    fixed: &FixedEffects,
    data: &GpData,
    spec: ModelSpec,
    backend: Backend,
) -> Result<f64> {
    hyper.validate()?;
    if spec.covariate && fixed.beta1.is_none() {
        return Err(Error::InvalidConfig("covariate model needs beta1".into()));
    }
    let prob = Problem::new(data, spec, Priors::default(), backend)?;
    let r = residual_column(data, fixed);
    let (logdet, gram) = whiten(backend, &prob.cov_params(hyper), &prob.geometry(), &[&r])?;
    Ok(-0.5 * (prob.n_obs as f64 * LN_2PI + logdet + gram[(0, 0)]))
}

/// Log posterior density at (θ, fixed effects): the conditional likelihood,
/// the PC priors on θ (log / atanh scale, Jacobians included) and, for the
/// diurnal model, the random-walk prior density of the levels.
pub fn log_posterior(
    hyper: &GpHyperParams,
    fixed: &FixedEffects,
    data: &GpData,
    spec: ModelSpec,
    priors: &Priors,
    backend: Backend,
) -> Result<f64> {
    let ll = log_likelihood(hyper, fixed, data, spec, backend)?;
    let layout = ParamLayout::new(spec, &data.classes());
    let mut lp = ll + layout.log_prior(&layout.from_hyper(hyper), priors);
    if spec.diurnal {
        let d = fixed.diurnal.ok_or(Error::InvalidConfig("diurnal model needs levels".into()))?;
        let sd = hyper.sigma_d.ok_or(Error::OutOfDomain {
            name: "sigma_d",
            value: f64::NAN,
        })?;
        let unit = diurnal_precision_unit();
        let a = DVector::from_column_slice(&d[..DIURNAL_DIM]);
        let quad = a.dot(&(&unit * &a)) / (sd * sd);
        let ch = unit.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = ch.l_dirty();
        let logdet = 2.0 * (0..DIURNAL_DIM).map(|i| l[(i, i)].ln()).sum::<f64>()
            - DIURNAL_DIM as f64 * (sd * sd).ln();
        lp += 0.5 * (logdet - DIURNAL_DIM as f64 * LN_2PI - quad);
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::data::Site;
    use crate::gp::hyper::NoiseGrouping;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn site(id: &str, lat: f64, lon: f64, class: StationClass) -> Site {
        Site {
            id: id.to_string(),
            lat,
            lon,
            class,
            x1: Some(1.0 + lat - 53.0),
        }
    }

    fn hyper() -> GpHyperParams {
        GpHyperParams {
            phi: 150.0,
            sigma_z: 0.7,
            sigma_eps: [0.2, 0.4, 0.45, 0.5, 0.9],
            rho: Some(0.6),
            sigma_d: Some(0.1),
        }
    }

    #[test]
    fn two_far_points_match_closed_form() {
        // 5000 km apart: the spatial correlation underflows to zero
        let data = GpData {
            sites: vec![site("a", 10.0, 0.0, StationClass::Met), site("b", 55.0, 0.0, StationClass::A)],
            t0: 0,
            n_times: 1,
            y: vec![vec![Some(1.3)], vec![Some(2.1)]],
        };
        let spec = ModelSpec::new(Variant::Igp, NoiseGrouping::PerClass);
        let h = hyper();
        let fixed = FixedEffects {
            beta0: 1.5,
            beta1: None,
            diurnal: None,
        };
        let ll = log_likelihood(&h, &fixed, &data, spec, Backend::Dense).unwrap();
        let v1: f64 = 0.49 * (1.0 + 1e-10) + 0.04;
        let v2: f64 = 0.49 * (1.0 + 1e-10) + 0.16;
        let want = -0.5 * (2.0 * LN_2PI + v1.ln() + v2.ln() + 0.2f64.powi(2) / v1 + 0.6f64.powi(2) / v2);
        assert_relative_eq!(ll, want, max_relative = 1e-12);
    }

    #[test]
    fn missing_entry_equals_reduced_problem() {
        let sites = vec![
            site("a", 53.0, -8.0, StationClass::Met),
            site("b", 53.3, -7.7, StationClass::A),
            site("c", 52.8, -8.4, StationClass::U),
        ];
        let y = vec![
            vec![Some(1.0), Some(1.4), Some(0.9)],
            vec![Some(1.2), None, Some(1.1)],
            vec![Some(0.7), Some(1.0), Some(1.3)],
        ];
        let full = GpData {
            sites: sites.clone(),
            t0: 0,
            n_times: 3,
            y,
        };
        // site b only observed at t=0 and t=2 is the same as a two-slice set
        // for the independent-replicate model when slice 1 is handled apart
        let fixed = FixedEffects {
            beta0: 1.0,
            beta1: Some(0.2),
            diurnal: None,
        };
        for variant in [Variant::Igp, Variant::Ar1] {
            let mut spec = ModelSpec::new(variant, NoiseGrouping::PerClass);
            spec.covariate = true;
            let a = log_likelihood(&hyper(), &fixed, &full, spec, Backend::Auto).unwrap();
            let b = log_likelihood(&hyper(), &fixed, &full, spec, Backend::Dense).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
        // IGP: dropping the missing entry equals the sum over slices built
        // directly on the reduced sets
        let spec = {
            let mut s = ModelSpec::new(Variant::Igp, NoiseGrouping::PerClass);
            s.covariate = true;
            s
        };
        let whole = log_likelihood(&hyper(), &fixed, &full, spec, Backend::Dense).unwrap();
        let mut parts = 0.0;
        for t in 0..3 {
            let keep: Vec<usize> = (0..3).filter(|&s| full.y[s][t].is_some()).collect();
            let slice = GpData {
                sites: keep.iter().map(|&s| sites[s].clone()).collect(),
                t0: 0,
                n_times: 1,
                y: keep.iter().map(|&s| vec![full.y[s][t]]).collect(),
            };
            parts += log_likelihood(&hyper(), &fixed, &slice, spec, Backend::Dense).unwrap();
        }
        assert_relative_eq!(whole, parts, max_relative = 1e-12);
    }

    #[test]
    fn marginal_backends_agree() {
        let sites: Vec<Site> = (0..4)
            .map(|i| site(&i.to_string(), 53.0 + 0.2 * i as f64, -8.0 + 0.15 * (i * i) as f64, StationClass::ALL[i]))
            .collect();
        let nt = 30;
        let y: Vec<Vec<Option<f64>>> = (0..4)
            .map(|s| (0..nt).map(|t| Some(1.0 + 0.3 * ((s * 5 + t * 3) as f64).sin())).collect())
            .collect();
        let data = GpData {
            sites,
            t0: 1_717_200_000,
            n_times: nt,
            y,
        };
        for variant in [Variant::Igp, Variant::Ar1] {
            let mut spec = ModelSpec::new(variant, NoiseGrouping::PerClass);
            spec.covariate = true;
            spec.diurnal = true;
            let p0 = Problem::new(&data, spec, Priors::default(), Backend::Dense).unwrap();
            let p1 = Problem::new(&data, spec, Priors::default(), Backend::Spectral).unwrap();
            let m0 = p0.marginal(&hyper()).unwrap();
            let m1 = p1.marginal(&hyper()).unwrap();
            assert_relative_eq!(m0.loglik, m1.loglik, max_relative = 1e-10);
            let d = p1.fixed_effects(&m1.coef).diurnal.unwrap();
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
