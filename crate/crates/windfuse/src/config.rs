//! TOML configuration files for modelling and simulation runs.
//!
//! Every section is optional; omitted keys take the library defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use windfuse_core::bias::BiasConfig;
use windfuse_core::eval::{LosocvConfig, ScoreScale};
use windfuse_core::gp::backend::Backend;
use windfuse_core::gp::fit::FitConfig;
use windfuse_core::gp::prior::{PcCor1, PcRange, PcSd};
use windfuse_core::gp::{ModelSpec, Priors, Variant};
use windfuse_core::optim::BfgsConfig;
use windfuse_core::qc::QcConfig;
use windfuse_core::sim::{BoxLayout, Layout, SimulationConfig, Strategy, StudyConfig};
use windfuse_core::StationClass;

use crate::error::{Error, Result};
use crate::io::read_stations;
use crate::time::parse_timestamp;

/// Tail statement `P(x beyond threshold) = prob` calibrating one prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub threshold: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    /// P(φ < threshold).
    pub range: Tail,
    /// P(σ_z > threshold).
    pub sigma_z: Tail,
    /// P(σ_ε > threshold), every nugget.
    pub sigma_eps: Tail,
    /// P(ρ > threshold).
    pub rho: Tail,
    /// P(σ_d > threshold), diurnal random walk.
    pub sigma_d: Tail,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection {
            range: Tail { threshold: 200.0, prob: 0.3 },
            sigma_z: Tail { threshold: 0.75, prob: 0.5 },
            sigma_eps: Tail { threshold: 0.75, prob: 0.1 },
            rho: Tail { threshold: 0.8, prob: 0.7 },
            sigma_d: Tail { threshold: 1.0, prob: 0.01 },
        }
    }
}

impl PriorSection {
    pub fn priors(&self) -> Result<Priors> {
        for (name, t) in [
            ("range", self.range),
            ("sigma_z", self.sigma_z),
            ("sigma_eps", self.sigma_eps),
            ("rho", self.rho),
            ("sigma_d", self.sigma_d),
        ] {
            if !(t.prob > 0.0 && t.prob < 1.0 && t.threshold.is_finite()) {
                return Err(Error::Invalid(format!("prior `{name}`: need 0 < prob < 1 and a finite threshold")));
            }
        }
        if !(self.range.threshold > 0.0 && self.sigma_z.threshold > 0.0 && self.sigma_eps.threshold > 0.0 && self.sigma_d.threshold > 0.0) {
            return Err(Error::Invalid("prior thresholds for range and sds must be positive".into()));
        }
        let rho = PcCor1::from_tail(self.rho.threshold, self.rho.prob);
        if !rho.theta.is_finite() {
            return Err(Error::Invalid(format!(
                "no correlation prior has P(rho > {}) = {}",
                self.rho.threshold, self.rho.prob
            )));
        }
        Ok(Priors {
            range: PcRange::from_tail(self.range.threshold, self.range.prob),
            sigma_z: PcSd::from_tail(self.sigma_z.threshold, self.sigma_z.prob),
            sigma_eps: PcSd::from_tail(self.sigma_eps.threshold, self.sigma_eps.prob),
            rho,
            sigma_d: PcSd::from_tail(self.sigma_d.threshold, self.sigma_d.prob),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub start_factors: Vec<f64>,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub laplace: bool,
    pub hessian_step: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        FitSection {
            start_factors: f.start_factors,
            max_iter: f.bfgs.max_iter,
            grad_tol: f.bfgs.grad_tol,
            laplace: f.laplace,
            hessian_step: f.hessian_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LosocvSection {
    pub held_out_class: String,
    pub warm_start: bool,
    pub extreme_percentiles: Vec<f64>,
}

impl Default for LosocvSection {
    fn default() -> Self {
        LosocvSection {
            held_out_class: "MET".into(),
            warm_start: true,
            extreme_percentiles: vec![1.0, 2.5, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcSection {
    pub missing_threshold: f64,
    pub min_neighbours: usize,
    pub rho_min: f64,
    pub candidate_set: usize,
}

impl Default for QcSection {
    fn default() -> Self {
        let q = QcConfig::default();
        QcSection {
            missing_threshold: q.missing_threshold,
            min_neighbours: q.min_neighbours,
            rho_min: q.rho_min,
            candidate_set: q.candidate_set,
        }
    }
}

impl QcSection {
    pub fn qc(&self) -> QcConfig {
        QcConfig {
            missing_threshold: self.missing_threshold,
            min_neighbours: self.min_neighbours,
            rho_min: self.rho_min,
            candidate_set: self.candidate_set,
        }
    }
}

/// Everything `fit`, `losocv` and `bias-correct` read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Model string such as `igp+grouped+cov+diurnal`.
    pub model: String,
    /// `auto`, `dense`, `spectral`, `slice` or `kalman`.
    pub backend: String,
    pub fit: FitSection,
    pub priors: PriorSection,
    pub bias: BiasConfig,
    pub losocv: LosocvSection,
    pub qc: QcSection,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: "igp+grouped+cov+diurnal".into(),
            backend: "auto".into(),
            fit: FitSection::default(),
            priors: PriorSection::default(),
            bias: BiasConfig::default(),
            losocv: LosocvSection::default(),
            qc: QcSection::default(),
        }
    }
}

pub fn parse_backend(s: &str) -> Result<Backend> {
    Ok(match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Backend::Auto,
        "dense" => Backend::Dense,
        "spectral" => Backend::Spectral,
        "slice" => Backend::Slice,
        "kalman" => Backend::Kalman,
        other => return Err(Error::Invalid(format!("unknown backend `{other}`"))),
    })
}

pub fn parse_variant(s: &str) -> Result<Variant> {
    match s.trim().to_ascii_lowercase().as_str() {
        "igp" => Ok(Variant::Igp),
        "ar1" => Ok(Variant::Ar1),
        other => Err(Error::Invalid(format!("unknown variant `{other}` (igp or ar1)"))),
    }
}

pub fn parse_strategy(s: &str) -> Result<Strategy> {
    Strategy::ALL
        .into_iter()
        .find(|x| x.as_str() == s.trim().to_ascii_lowercase())
        .ok_or_else(|| Error::Invalid(format!("unknown strategy `{s}` (reliable_only, pooled or grouped)")))
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        load_toml(path)
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        Ok(self.model.parse()?)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        if self.fit.start_factors.is_empty() || self.fit.start_factors.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Invalid("fit.start_factors must be non-empty and positive".into()));
        }
        Ok(FitConfig {
            priors: self.priors.priors()?,
            bfgs: BfgsConfig {
                grad_tol: self.fit.grad_tol,
                max_iter: self.fit.max_iter,
                ..BfgsConfig::default()
            },
            start_factors: self.fit.start_factors.clone(),
            backend: parse_backend(&self.backend)?,
            laplace: self.fit.laplace,
            hessian_step: self.fit.hessian_step,
        })
    }

    /// Cross-validation on observed wind: RMSE in m/s, CRPS on √wind.
    pub fn losocv_config(&self) -> Result<LosocvConfig> {
        Ok(LosocvConfig {
            fit: self.fit_config()?,
            held_out_class: self.losocv.held_out_class.parse::<StationClass>()?,
            scale: ScoreScale::SqrtWind,
            warm_start: self.losocv.warm_start,
            extreme_percentiles: self.losocv.extreme_percentiles.clone(),
        })
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| Error::Toml {
        path: path.to_path_buf(),
        source,
    })
}

/// Station layout: a generated box or a stations CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    /// Stations CSV; overrides the box when given.
    pub stations_csv: Option<String>,
    pub n_met: usize,
    pub n_pws1: usize,
    pub n_pws2: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub seed: u64,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let b = BoxLayout::default();
        LayoutSection {
            stations_csv: None,
            n_met: b.n_met,
            n_pws1: b.n_pws1,
            n_pws2: b.n_pws2,
            lat_min: b.lat_min,
            lat_max: b.lat_max,
            lon_min: b.lon_min,
            lon_max: b.lon_max,
            seed: b.seed,
        }
    }
}

/// `simulate --config`: field, noise and layout parameters. Defaults are the
/// reference study settings (φ = 200 km, σ_z = 0.7, σ_Met = 0.2, ρ = 0.8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_times: usize,
    pub t0: String,
    pub mean: f64,
    pub phi: f64,
    pub sigma_z: f64,
    pub sigma_met: f64,
    pub sigma_pws1: f64,
    pub rho: f64,
    /// Station ids emitted as junk; when absent every class-U station is junk.
    pub junk_group: Option<Vec<String>>,
    pub junk_sd: f64,
    pub seed: u64,
    pub layout: LayoutSection,
}

impl Default for SimSection {
    fn default() -> Self {
        let t = SimulationConfig::table8(0.5, 1);
        SimSection {
            n_times: t.n_times,
            t0: crate::time::format_timestamp(t.t0),
            mean: t.mean,
            phi: t.phi,
            sigma_z: t.sigma_z,
            sigma_met: t.sigma_met,
            sigma_pws1: t.sigma_pws1,
            rho: t.rho,
            junk_group: None,
            junk_sd: t.junk_sd,
            seed: t.seed,
            layout: LayoutSection::default(),
        }
    }
}

impl SimSection {
    /// Relative `stations_csv` paths resolve against `base_dir`.
    pub fn simulation_config(&self, base_dir: &Path) -> Result<SimulationConfig> {
        let layout = match &self.layout.stations_csv {
            Some(p) => Layout::Stations(read_stations(&base_dir.join(p))?),
            None => Layout::Box(BoxLayout {
                n_met: self.layout.n_met,
                n_pws1: self.layout.n_pws1,
                n_pws2: self.layout.n_pws2,
                lat_min: self.layout.lat_min,
                lat_max: self.layout.lat_max,
                lon_min: self.layout.lon_min,
                lon_max: self.layout.lon_max,
                seed: self.layout.seed,
            }),
        };
        let junk_group = match &self.junk_group {
            Some(j) => j.clone(),
            None => layout
                .stations()
                .into_iter()
                .filter(|s| s.class == StationClass::U)
                .map(|s| s.id)
                .collect(),
        };
        let cfg = SimulationConfig {
            layout,
            n_times: self.n_times,
            t0: parse_timestamp(&self.t0)?,
            mean: self.mean,
            phi: self.phi,
            sigma_z: self.sigma_z,
            sigma_met: self.sigma_met,
            sigma_pws1: self.sigma_pws1,
            rho: self.rho,
            junk_group,
            junk_sd: self.junk_sd,
            seed: self.seed,
        };
        cfg.validate(&cfg.layout.stations())?;
        Ok(cfg)
    }
}

/// `sim-study --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub noise_levels: Vec<f64>,
    pub variants: Vec<String>,
    pub strategies: Vec<String>,
    pub replications: usize,
    pub simulation: SimSection,
    pub fit: FitSection,
    pub priors: PriorSection,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            noise_levels: vec![0.3, 0.4, 0.5],
            variants: vec!["igp".into(), "ar1".into()],
            strategies: Strategy::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            replications: 20,
            simulation: SimSection::default(),
            fit: FitSection::default(),
            priors: PriorSection::default(),
        }
    }
}

impl StudySection {
    pub fn study_config(&self, base_dir: &Path) -> Result<StudyConfig> {
        if self.replications == 0 || self.noise_levels.is_empty() {
            return Err(Error::Invalid("a study needs at least one replication and one noise level".into()));
        }
        let base = self.simulation.simulation_config(base_dir)?;
        let model = ModelConfig {
            fit: self.fit.clone(),
            priors: self.priors.clone(),
            ..ModelConfig::default()
        };
        let mut study = StudyConfig::table9(self.replications, base.seed);
        study.base = base;
        study.noise_levels = self.noise_levels.clone();
        study.variants = self.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
        study.strategies = self.strategies.iter().map(|s| parse_strategy(s)).collect::<Result<_>>()?;
        study.cv.fit = model.fit_config()?;
        Ok(study)
    }
}
