//! Synthetic separable Matérn × AR(1) fields with grouped observation noise
//! and an optional junk group, plus the three-strategy comparison study.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::cv::{losocv_model, uncorrected_group_experiment, LosocvConfig, ScoreReport};
use crate::exec::{Executor, Sequential};
use crate::gp::data::{GpData, Site};
use crate::gp::hyper::{GpHyperParams, ModelSpec, NoiseGrouping, Variant};
use crate::gp::matern::{covariance_matrix, distance_matrix};
use crate::model::{StationClass, StationRecord, Timestamp};

/// `n_met + n_pws1 + n_pws2` sites uniform in a lat/lon box. PWS-1 sites
/// cycle through classes A, B, C; PWS-2 sites are class U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxLayout {
    pub n_met: usize,
    pub n_pws1: usize,
    pub n_pws2: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub seed: u64,
}

impl Default for BoxLayout {
    fn default() -> Self {
        BoxLayout {
            n_met: 23,
            n_pws1: 19,
            n_pws2: 7,
            lat_min: 51.5,
            lat_max: 55.5,
            lon_min: -10.5,
            lon_max: -6.5,
            seed: 1,
        }
    }
}

impl BoxLayout {
    pub fn stations(&self) -> Vec<StationRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.n_met + self.n_pws1 + self.n_pws2);
        let abc = [StationClass::A, StationClass::B, StationClass::C];
        let groups = [("MET", self.n_met), ("PWS", self.n_pws1), ("UNK", self.n_pws2)];
        for (g, (prefix, count)) in groups.into_iter().enumerate() {
            for i in 0..count {
                let lat = rng.random_range(self.lat_min..self.lat_max);
                let lon = rng.random_range(self.lon_min..self.lon_max);
                let class = match g {
                    0 => StationClass::Met,
                    1 => abc[i % 3],
                    _ => StationClass::U,
                };
                out.push(StationRecord::new(format!("{prefix}{:02}", i + 1), lat, lon, class));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    Box(BoxLayout),
    Stations(Vec<StationRecord>),
}

impl Layout {
    pub fn stations(&self) -> Vec<StationRecord> {
        match self {
            Layout::Box(b) => b.stations(),
            Layout::Stations(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub layout: Layout,
    pub n_times: usize,
    pub t0: Timestamp,
    /// Constant mean added to the latent field.
    pub mean: f64,
    pub phi: f64,
    pub sigma_z: f64,
    pub sigma_met: f64,
    /// Noise sd for every non-Met station outside the junk group.
    pub sigma_pws1: f64,
    pub rho: f64,
    /// Stations emitted as iid N(0, junk_sd²), independent of the field.
    pub junk_group: Vec<String>,
    pub junk_sd: f64,
    pub seed: u64,
}

impl SimulationConfig {
    /// φ = 200 km, σ_z = 0.7, σ_Met = 0.2, ρ = 0.8 on the default 49-site
    /// box, 100 hours, U stations as junk.
    pub fn table8(sigma_pws1: f64, seed: u64) -> Self {
        let layout = Layout::Box(BoxLayout::default());
        let junk_group = layout
            .stations()
            .into_iter()
            .filter(|s| s.class == StationClass::U)
            .map(|s| s.id)
            .collect();
        SimulationConfig {
            layout,
            n_times: 100,
            t0: 1_717_200_000,
            mean: 0.0,
            phi: 200.0,
            sigma_z: 0.7,
            sigma_met: 0.2,
            sigma_pws1,
            rho: 0.8,
            junk_group,
            junk_sd: 1.0,
            seed,
        }
    }

    pub fn validate(&self, stations: &[StationRecord]) -> Result<()> {
        for (name, v) in [
            ("phi", self.phi),
            ("sigma_z", self.sigma_z),
            ("sigma_met", self.sigma_met),
            ("sigma_pws1", self.sigma_pws1),
            ("junk_sd", self.junk_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: self.rho,
            });
        }
        if self.n_times < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                got: self.n_times,
            });
        }
        if stations.is_empty() {
            return Err(Error::Empty);
        }
        for j in &self.junk_group {
            if !stations.iter().any(|s| &s.id == j) {
                return Err(Error::UnknownStation(j.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub stations: Vec<StationRecord>,
    pub t0: Timestamp,
    /// Latent field, `z[s][t]`.
    pub z: Vec<Vec<f64>>,
    /// Observations, `obs[s][t]`: mean + z + noise, or pure junk.
    pub obs: Vec<Vec<f64>>,
    pub junk: Vec<bool>,
    pub config: SimulationConfig,
}

impl SimulatedDataset {
    pub fn to_gp_data(&self) -> GpData {
        GpData {
            sites: self
                .stations
                .iter()
                .map(|s| Site {
                    id: s.id.clone(),
                    lat: s.lat,
                    lon: s.lon,
                    class: s.class,
                    x1: None,
                })
                .collect(),
            t0: self.t0,
            n_times: self.config.n_times,
            y: self.obs.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Spatial Cholesky factor, retrying once with a larger jitter.
fn spatial_factor(dist: &DMatrix<f64>, phi: f64, sigma_z: f64) -> Result<DMatrix<f64>> {
    let c = covariance_matrix(dist, phi, sigma_z);
    if let Some(ch) = c.clone().cholesky() {
        return Ok(ch.unpack());
    }
    let mut c2 = c;
    for i in 0..c2.nrows() {
        c2[(i, i)] += 1e-8 * sigma_z * sigma_z;
    }
    c2.cholesky().map(|ch| ch.unpack()).ok_or(Error::NotPositiveDefinite)
}

/// z₀ = L η₀, z_t = ρ z_{t−1} + √(1−ρ²) L η_t, then per-class noise.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulatedDataset> {
    let stations = cfg.layout.stations();
    cfg.validate(&stations)?;
    let n = stations.len();
    let nt = cfg.n_times;
    let pts: Vec<(f64, f64)> = stations.iter().map(|s| (s.lat, s.lon)).collect();
    let l = spatial_factor(&distance_matrix(&pts), cfg.phi, cfg.sigma_z)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let innov = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut z = vec![vec![0.0; nt]; n];
    let mut prev = &l * normals(&mut rng, n);
    for t in 0..nt {
        if t > 0 {
            prev = &prev * cfg.rho + (&l * normals(&mut rng, n)) * innov;
        }
        for s in 0..n {
            z[s][t] = prev[s];
        }
    }
    let junk: Vec<bool> = stations.iter().map(|s| cfg.junk_group.contains(&s.id)).collect();
    let mut obs = vec![vec![0.0; nt]; n];
    for s in 0..n {
        let sd = if stations[s].class.is_met() { cfg.sigma_met } else { cfg.sigma_pws1 };
        for t in 0..nt {
            let e: f64 = rng.sample(StandardNormal);
            obs[s][t] = if junk[s] { cfg.junk_sd * e } else { cfg.mean + z[s][t] + sd * e };
        }
    }
    Ok(SimulatedDataset {
        stations,
        t0: cfg.t0,
        z,
        obs,
        junk,
        config: cfg.clone(),
    })
}

/// Modelling strategies compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Met stations only, one nugget.
    ReliableOnly,
    /// All stations, one nugget.
    Pooled,
    /// All stations, separate Met / PWS-1 / PWS-2 nuggets.
    Grouped,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ReliableOnly, Strategy::Pooled, Strategy::Grouped];

    pub fn spec(self, variant: Variant) -> ModelSpec {
        match self {
            Strategy::ReliableOnly => {
                let mut s = ModelSpec::new(variant, NoiseGrouping::Pooled);
                s.reliable_only = true;
                s
            }
            Strategy::Pooled => ModelSpec::new(variant, NoiseGrouping::Pooled),
            Strategy::Grouped => ModelSpec::new(variant, NoiseGrouping::MetPwsU),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ReliableOnly => "reliable_only",
            Strategy::Pooled => "pooled",
            Strategy::Grouped => "grouped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Template; `sigma_pws1` and `seed` are overridden per cell.
    pub base: SimulationConfig,
    pub noise_levels: Vec<f64>,
    pub variants: Vec<Variant>,
    pub strategies: Vec<Strategy>,
    pub replications: usize,
    pub cv: LosocvConfig,
}

impl StudyConfig {
    pub fn table9(replications: usize, seed: u64) -> Self {
        let mut cv = LosocvConfig {
            scale: crate::eval::cv::ScoreScale::Model,
            ..LosocvConfig::default()
        };
        cv.extreme_percentiles.clear();
        StudyConfig {
            base: SimulationConfig::table8(0.5, seed),
            noise_levels: vec![0.3, 0.4, 0.5],
            variants: vec![Variant::Igp, Variant::Ar1],
            strategies: Strategy::ALL.to_vec(),
            replications,
            cv,
        }
    }
}

/// Replication seed: one stream per replication, shared by every noise
/// level, variant and strategy so comparisons use common random numbers.
pub fn replication_seed(base: u64, rep: usize) -> u64 {
    // splitmix64 step
    let mut z = base.wrapping_add((rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub noise: f64,
    pub variant: Variant,
    pub strategy: Strategy,
    pub replication: usize,
    pub seed: u64,
    pub rmse: f64,
    pub crps: f64,
    pub failed_folds: usize,
    /// All-data fit.
    pub hyper: Option<GpHyperParams>,
    pub error: Option<String>,
}

struct Cell {
    noise: f64,
    variant: Variant,
    strategy: Strategy,
    rep: usize,
}

fn run_cell(cfg: &StudyConfig, c: &Cell) -> CellResult {
    let seed = replication_seed(cfg.base.seed, c.rep);
    let mut sc = cfg.base.clone();
    sc.sigma_pws1 = c.noise;
    sc.seed = seed;
    let mut res = CellResult {
        noise: c.noise,
        variant: c.variant,
        strategy: c.strategy,
        replication: c.rep,
        seed,
        rmse: f64::NAN,
        crps: f64::NAN,
        failed_folds: 0,
        hyper: None,
        error: None,
    };
    let out = simulate(&sc).and_then(|sim| losocv_model(&sim.to_gp_data(), c.strategy.spec(c.variant), &cfg.cv, &Sequential));
    match out {
        Ok(r) => {
            res.rmse = r.rmse;
            res.crps = r.crps_sqrt;
            res.failed_folds = r.failures.len();
            res.hyper = r.full_fit;
        }
        Err(e) => res.error = Some(e.to_string()),
    }
    res
}

/// Every (noise, variant, strategy, replication) cell, in that nesting
/// order. Cells run through `exec`; folds within a cell run in order.
pub fn run_simulation_study<E: Executor>(cfg: &StudyConfig, exec: &E) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for &noise in &cfg.noise_levels {
        for &variant in &cfg.variants {
            for &strategy in &cfg.strategies {
                for rep in 0..cfg.replications {
                    cells.push(Cell {
                        noise,
                        variant,
                        strategy,
                        rep,
                    });
                }
            }
        }
    }
    exec.map_indices(cells.len(), &|i| {
        let r = run_cell(cfg, &cells[i]);
        log::info!(
            "cell σ={} {:?} {} rep {}: rmse {:.4} crps {:.4}",
            r.noise,
            r.variant,
            r.strategy.as_str(),
            r.replication,
            r.rmse,
            r.crps
        );
        r
    })
}

/// Averages over successful replications of one (noise, variant, strategy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise: f64,
    pub variant: Variant,
    pub strategy: Strategy,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rmse: f64,
    pub crps: f64,
    pub phi: f64,
    pub sigma_z: f64,
    pub rho: Option<f64>,
    /// σ̂_Met (the single σ̂_ε for one-nugget strategies).
    pub sigma_met: f64,
    pub sigma_pws1: Option<f64>,
    pub sigma_pws2: Option<f64>,
}

fn avg(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(results: &[CellResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, Variant, Strategy)> = Vec::new();
    for r in results {
        if !keys.iter().any(|k| k.0 == r.noise && k.1 == r.variant && k.2 == r.strategy) {
            keys.push((r.noise, r.variant, r.strategy));
        }
    }
    keys.into_iter()
        .map(|(noise, variant, strategy)| {
            let cell: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.noise == noise && r.variant == variant && r.strategy == strategy)
                .collect();
            let ok: Vec<&CellResult> = cell.iter().copied().filter(|r| r.error.is_none() && r.rmse.is_finite()).collect();
            let hy: Vec<GpHyperParams> = ok.iter().filter_map(|r| r.hyper).collect();
            let grouped = strategy == Strategy::Grouped;
            SummaryRow {
                noise,
                variant,
                strategy,
                n_ok: ok.len(),
                n_failed: cell.len() - ok.len(),
                rmse: avg(ok.iter().map(|r| r.rmse)),
                crps: avg(ok.iter().map(|r| r.crps)),
                phi: avg(hy.iter().map(|h| h.phi)),
                sigma_z: avg(hy.iter().map(|h| h.sigma_z)),
                rho: (variant == Variant::Ar1).then(|| avg(hy.iter().filter_map(|h| h.rho))),
                sigma_met: avg(hy.iter().map(|h| h.nugget_sd(StationClass::Met))),
                sigma_pws1: grouped.then(|| avg(hy.iter().map(|h| h.nugget_sd(StationClass::A)))),
                sigma_pws2: grouped.then(|| avg(hy.iter().map(|h| h.nugget_sd(StationClass::U)))),
            }
        })
        .collect()
}

/// Clean-versus-junk comparison of pooled and grouped nuggets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunkReport {
    pub variant: Variant,
    pub clean_pooled: ScoreReport,
    pub clean_grouped: ScoreReport,
    pub junk_pooled: ScoreReport,
    pub junk_grouped: ScoreReport,
}

impl JunkReport {
    /// σ̂_U / σ̂_Met of the grouped model on the junk data.
    pub fn junk_ratio(&self) -> Option<f64> {
        self.junk_grouped
            .full_fit
            .map(|h| h.nugget_sd(StationClass::U) / h.nugget_sd(StationClass::Met))
    }

    pub fn pooled_sigma(&self) -> (Option<f64>, Option<f64>) {
        let s = |r: &ScoreReport| r.full_fit.map(|h| h.nugget_sd(StationClass::Met));
        (s(&self.clean_pooled), s(&self.junk_pooled))
    }

    pub fn pooled_degradation(&self) -> f64 {
        self.junk_pooled.rmse - self.clean_pooled.rmse
    }

    pub fn grouped_degradation(&self) -> f64 {
        self.junk_grouped.rmse - self.clean_grouped.rmse
    }
}

/// Simulate `base` twice from the same seed, once with the junk group
/// replaced by ordinary PWS-1 stations, and cross-validate pooled and
/// per-class nugget models on both.
pub fn junk_experiment<E: Executor>(base: &SimulationConfig, variant: Variant, cv: &LosocvConfig, exec: &E) -> Result<JunkReport> {
    if base.junk_group.is_empty() {
        return Err(Error::InvalidConfig("junk experiment needs a junk group".into()));
    }
    let mut clean_cfg = base.clone();
    clean_cfg.junk_group.clear();
    let clean = simulate(&clean_cfg)?.to_gp_data();
    let junk = simulate(base)?.to_gp_data();
    let c = uncorrected_group_experiment(&clean, variant, StationClass::U, cv, exec)?;
    let j = uncorrected_group_experiment(&junk, variant, StationClass::U, cv, exec)?;
    Ok(JunkReport {
        variant,
        clean_pooled: c.pooled,
        clean_grouped: c.grouped,
        junk_pooled: j.pooled,
        junk_grouped: j.grouped,
    })
}
