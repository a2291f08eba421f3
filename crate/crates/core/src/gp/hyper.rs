//! Model specification, hyperparameters and their packing into the
//! unconstrained optimisation vector.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::prior::Priors;
use crate::model::StationClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Time slices are independent replicates.
    Igp,
    /// Separable space-time model with AR(1) correlation in time.
    Ar1,
}

/// How station classes share nugget variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseGrouping {
    /// One nugget per class: Met, A, B, C, U.
    PerClass,
    /// A single nugget for every station.
    Pooled,
    /// Met / PWS (A, B, C) / U.
    MetPwsU,
}

impl NoiseGrouping {
    pub fn n_groups(self) -> usize {
        match self {
            NoiseGrouping::PerClass => 5,
            NoiseGrouping::Pooled => 1,
            NoiseGrouping::MetPwsU => 3,
        }
    }

    pub fn group(self, class: StationClass) -> usize {
        match self {
            NoiseGrouping::PerClass => class.index(),
            NoiseGrouping::Pooled => 0,
            NoiseGrouping::MetPwsU => match class {
                StationClass::Met => 0,
                StationClass::A | StationClass::B | StationClass::C => 1,
                StationClass::U => 2,
            },
        }
    }

    pub fn group_name(self, g: usize) -> &'static str {
        match self {
            NoiseGrouping::PerClass => StationClass::ALL[g].as_str(),
            NoiseGrouping::Pooled => "all",
            NoiseGrouping::MetPwsU => ["met", "pws1", "pws2"][g],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub grouping: NoiseGrouping,
    /// Include the √-Weibull-mean covariate X₁.
    pub covariate: bool,
    /// Include the cyclic 24-hour diurnal effect.
    pub diurnal: bool,
    /// Fit and predict from Met stations only.
    pub reliable_only: bool,
}

impl ModelSpec {
    pub fn new(variant: Variant, grouping: NoiseGrouping) -> Self {
        ModelSpec {
            variant,
            grouping,
            covariate: false,
            diurnal: false,
            reliable_only: false,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.variant {
            Variant::Igp => "igp",
            Variant::Ar1 => "ar1",
        })?;
        f.write_str(match self.grouping {
            NoiseGrouping::PerClass => "+grouped",
            NoiseGrouping::Pooled => "+pooled",
            NoiseGrouping::MetPwsU => "+grouped3",
        })?;
        if self.covariate {
            f.write_str("+cov")?;
        }
        if self.diurnal {
            f.write_str("+diurnal")?;
        }
        if self.reliable_only {
            f.write_str("+metonly")?;
        }
        Ok(())
    }
}

/// Parses `igp+grouped+cov+diurnal`, `ar1+pooled`, `igp+metonly`, ...
/// The variant comes first; grouping defaults to per-class.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('+').map(|p| p.trim().to_ascii_lowercase());
        let variant = match parts.next().as_deref() {
            Some("igp") => Variant::Igp,
            Some("ar1") => Variant::Ar1,
            other => return Err(Error::InvalidConfig(format!("unknown model variant {other:?} in `{s}`"))),
        };
        let mut spec = ModelSpec::new(variant, NoiseGrouping::PerClass);
        for p in parts {
            match p.as_str() {
                "grouped" | "perclass" => spec.grouping = NoiseGrouping::PerClass,
                "pooled" => spec.grouping = NoiseGrouping::Pooled,
                "grouped3" => spec.grouping = NoiseGrouping::MetPwsU,
                "cov" => spec.covariate = true,
                "diurnal" => spec.diurnal = true,
                "metonly" | "reliable" => spec.reliable_only = true,
                other => return Err(Error::InvalidConfig(format!("unknown model option `{other}` in `{s}`"))),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperParams {
    /// Effective range (km).
    pub phi: f64,
    pub sigma_z: f64,
    /// Nugget sd per class, indexed by [`StationClass::index`].
    pub sigma_eps: [f64; 5],
    pub rho: Option<f64>,
    pub sigma_d: Option<f64>,
}

impl GpHyperParams {
    pub fn nugget_sd(&self, class: StationClass) -> f64 {
        self.sigma_eps[class.index()]
    }

    pub fn kappa(&self) -> f64 {
        crate::gp::matern::kappa(self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::OutOfDomain { name, value: v })
            }
        };
        check("phi", self.phi)?;
        check("sigma_z", self.sigma_z)?;
        for &s in &self.sigma_eps {
            check("sigma_eps", s)?;
        }
        if let Some(r) = self.rho {
            if !(r.is_finite() && r > -1.0 && r < 1.0) {
                return Err(Error::OutOfDomain { name: "rho", value: r });
            }
        }
        if let Some(d) = self.sigma_d {
            check("sigma_d", d)?;
        }
        Ok(())
    }
}

pub(crate) const LN_PHI_BOUNDS: (f64, f64) = (0.0, 9.903_487_552_536_127); // 1 km .. 20000 km
pub(crate) const LN_SD_BOUNDS: (f64, f64) = (-9.210_340_371_976_182, 2.302_585_092_994_046); // 1e-4 .. 10
pub(crate) const ATANH_RHO_BOUNDS: (f64, f64) = (-3.8, 3.8);

/// Which hyperparameters are free and where they sit in θ:
/// `[ln φ, ln σ_z, ln σ_g (active groups)…, atanh ρ?, ln σ_d?]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub spec: ModelSpec,
    pub active_groups: Vec<usize>,
}

impl ParamLayout {
    pub fn new(spec: ModelSpec, classes_present: &[StationClass]) -> Self {
        let mut active: Vec<usize> = classes_present.iter().map(|&c| spec.grouping.group(c)).collect();
        active.sort_unstable();
        active.dedup();
        ParamLayout {
            spec,
            active_groups: active,
        }
    }

    pub fn len(&self) -> usize {
        2 + self.active_groups.len()
            + usize::from(self.spec.variant == Variant::Ar1)
            + usize::from(self.spec.diurnal)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = vec![String::from("ln_phi"), String::from("ln_sigma_z")];
        for &g in &self.active_groups {
            v.push(format!("ln_sigma_eps_{}", self.spec.grouping.group_name(g)));
        }
        if self.spec.variant == Variant::Ar1 {
            v.push(String::from("atanh_rho"));
        }
        if self.spec.diurnal {
            v.push(String::from("ln_sigma_d"));
        }
        v
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![LN_PHI_BOUNDS.0, LN_SD_BOUNDS.0];
        let mut hi = vec![LN_PHI_BOUNDS.1, LN_SD_BOUNDS.1];
        for _ in &self.active_groups {
            lo.push(LN_SD_BOUNDS.0);
            hi.push(LN_SD_BOUNDS.1);
        }
        if self.spec.variant == Variant::Ar1 {
            lo.push(ATANH_RHO_BOUNDS.0);
            hi.push(ATANH_RHO_BOUNDS.1);
        }
        if self.spec.diurnal {
            lo.push(LN_SD_BOUNDS.0);
            hi.push(LN_SD_BOUNDS.1);
        }
        (lo, hi)
    }

    /// Unpack θ. Classes whose group has no data get `inactive_sd`.
    pub fn to_hyper(&self, theta: &[f64], inactive_sd: f64) -> GpHyperParams {
        let ng = self.active_groups.len();
        let mut group_sd = vec![inactive_sd; self.spec.grouping.n_groups()];
        for (k, &g) in self.active_groups.iter().enumerate() {
            group_sd[g] = theta[2 + k].exp();
        }
        let mut sigma_eps = [inactive_sd; 5];
        for c in StationClass::ALL {
            sigma_eps[c.index()] = group_sd[self.spec.grouping.group(c)];
        }
        let mut i = 2 + ng;
        let rho = if self.spec.variant == Variant::Ar1 {
            i += 1;
            Some(theta[i - 1].tanh())
        } else {
            None
        };
        let sigma_d = self.spec.diurnal.then(|| theta[i].exp());
        GpHyperParams {
            phi: theta[0].exp(),
            sigma_z: theta[1].exp(),
            sigma_eps,
            rho,
            sigma_d,
        }
    }

    pub fn from_hyper(&self, h: &GpHyperParams) -> Vec<f64> {
        let mut theta = vec![h.phi.ln(), h.sigma_z.ln()];
        for &g in &self.active_groups {
            let class = StationClass::ALL
                .into_iter()
                .find(|&c| self.spec.grouping.group(c) == g)
                .expect("every group has a class");
            theta.push(h.nugget_sd(class).ln());
        }
        if self.spec.variant == Variant::Ar1 {
            theta.push(h.rho.unwrap_or(0.0).atanh());
        }
        if self.spec.diurnal {
            theta.push(h.sigma_d.unwrap_or(0.1).ln());
        }
        theta
    }

    /// Log prior density of θ, including the Jacobians of the
    /// log / atanh reparameterisations.
    pub fn log_prior(&self, theta: &[f64], priors: &Priors) -> f64 {
        let phi = theta[0].exp();
        let mut lp = priors.range.log_density(phi) + theta[0];
        lp += priors.sigma_z.log_density(theta[1].exp()) + theta[1];
        let ng = self.active_groups.len();
        for k in 0..ng {
            lp += priors.sigma_eps.log_density(theta[2 + k].exp()) + theta[2 + k];
        }
        let mut i = 2 + ng;
        if self.spec.variant == Variant::Ar1 {
            let r = theta[i].tanh();
            // d rho / d atanh(rho) = 1 − ρ²
            lp += priors.rho.log_density(r) + (1.0 - r * r).ln();
            i += 1;
        }
        if self.spec.diurnal {
            lp += priors.sigma_d.log_density(theta[i].exp()) + theta[i];
        }
        lp
    }

    /// Prior medians, with the scale parameters multiplied by `factor`.
    pub fn start(&self, priors: &Priors, factor: f64) -> Vec<f64> {
        let h = GpHyperParams {
            phi: priors.range.median() * factor,
            sigma_z: priors.sigma_z.median() * factor,
            sigma_eps: [priors.sigma_eps.median() * factor; 5],
            rho: Some(priors.rho.median()),
            sigma_d: Some(priors.sigma_d.median() * factor),
        };
        let (lo, hi) = self.bounds();
        let mut t = self.from_hyper(&h);
        for i in 0..t.len() {
            t[i] = t[i].clamp(lo[i], hi[i]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn spec_round_trip() {
        for s in ["igp+grouped+cov+diurnal", "ar1+pooled", "igp+grouped+metonly", "ar1+grouped3"] {
            let spec: ModelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!("ar1".parse::<ModelSpec>().unwrap().grouping, NoiseGrouping::PerClass);
        assert!("gp+pooled".parse::<ModelSpec>().is_err());
        assert!("igp+bogus".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn theta_round_trip() {
        let spec: ModelSpec = "ar1+grouped3+diurnal".parse().unwrap();
        let lay = ParamLayout::new(spec, &[StationClass::Met, StationClass::A, StationClass::U]);
        assert_eq!(lay.len(), 7);
        let theta = [5.3, -0.36, -1.6, -0.69, 0.1, 1.1, -2.0];
        let h = lay.to_hyper(&theta, 0.3);
        assert_eq!(h.sigma_eps[StationClass::B.index()], h.sigma_eps[StationClass::A.index()]);
        let back = lay.from_hyper(&h);
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
