//! Command-line interface. Every subcommand reads CSV / TOML / JSON files and
//! writes CSV or JSON; see the README for the schemas.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use windfuse_core::distributions::select_distribution;
use windfuse_core::eval::losocv;
use windfuse_core::gp::predict::{predict_grid, GridSpec};
use windfuse_core::gp::{fit, predict, ModelSpec};
use windfuse_core::qc::quality_control;
use windfuse_core::sim::{run_simulation_study, simulate, summarize};
use windfuse_core::bias::run_bias_correction;

use crate::artifact::{evaluate_predictions, training_data, FitArtifact, FORMAT_VERSION};
use crate::config::{load_toml, parse_backend, parse_variant, ModelConfig, SimSection, StudySection};
use crate::error::{Error, Result};
use crate::exec::Rayon;
use crate::io;
use crate::time::parse_timestamp;

#[derive(Debug, Parser)]
#[command(name = "windfuse", version, about = "Bias-correct crowdsourced wind data and fuse it with station data in a Gaussian-process model")]
pub struct Cli {
    /// Worker threads for cross-validation and studies (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Weibull, Gamma and log-normal to every station and compare them.
    FitDist(FitDistArgs),
    /// Missing-data and Spearman-neighbour quality control.
    Qc(QcArgs),
    /// Calibrate the gridded Weibull field and quantile-map PWS series.
    BiasCorrect(BiasCorrectArgs),
    /// Fit the spatio-temporal model to corrected observations.
    Fit(FitArgs),
    /// Predict at target sites and hours from a fitted model.
    Predict(PredictArgs),
    /// Predict true wind on a regular lat/lon grid.
    PredictGrid(PredictGridArgs),
    /// Leave-one-station-out cross-validation of one or more models.
    Losocv(LosocvArgs),
    /// Score predictions against observations.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Run the three-strategy simulation study.
    SimStudy(SimStudyArgs),
}

#[derive(Debug, Args)]
pub struct FitDistArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QcArgs {
    #[arg(long)]
    pub stations: PathBuf,
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Model config; only its `[qc]` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasCorrectArgs {
    #[arg(long)]
    pub stations: PathBuf,
    #[arg(long)]
    pub observations: PathBuf,
    /// Gridded Weibull field: lon,lat,shape,scale.
    #[arg(long)]
    pub grid: PathBuf,
    /// Coastline polyline (lat,lon) for stations without dist_to_sea_km.
    #[arg(long)]
    pub coastline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-station calibration report; LOO and validation tables are written
    /// next to it.
    #[arg(long)]
    pub calib_report: PathBuf,
    /// Model config; only its `[bias]` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Overrides the variant of the configured model.
    #[arg(long)]
    pub variant: Option<String>,
    /// Bias-corrected observations (with a corrected_ms column).
    #[arg(long)]
    pub corrected: PathBuf,
    #[arg(long)]
    pub stations: PathBuf,
    /// Gridded Weibull field; required when the model uses X1.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub coastline: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// site_id,lat,lon,timestamp[,class][,dist_to_sea_km][,x1]
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictGridArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lat_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lat_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon_max: f64,
    /// Grid spacing in degrees.
    #[arg(long)]
    pub step: f64,
    /// Comma-separated timestamps; all fitted hours by default.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LosocvArgs {
    #[arg(long)]
    pub corrected: PathBuf,
    #[arg(long)]
    pub stations: PathBuf,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub coastline: Option<PathBuf>,
    /// Comma-separated model strings, or a file with one per line.
    #[arg(long)]
    pub models: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output of `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Observations: station_id,timestamp,wind_speed_ms.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pred")]
    pub model_id: String,
    /// Upper-tail percentages for the extreme-wind metrics.
    #[arg(long, value_delimiter = ',', default_value = "1,2.5,5")]
    pub percentiles: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Observations file, then stations file.
    #[arg(long, num_args = 2, value_names = ["OBS", "STATIONS"])]
    pub out: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimStudyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Performance table, then parameter table.
    #[arg(long, num_args = 2, value_names = ["PERF", "PARAMS"])]
    pub out: Vec<PathBuf>,
    /// Per-cell results.
    #[arg(long)]
    pub cells: Option<PathBuf>,
}

fn model_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        Some(p) => ModelConfig::load(p),
        None => Ok(ModelConfig::default()),
    }
}

fn config_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default()
}

fn parse_models(arg: &str) -> Result<Vec<ModelSpec>> {
    let p = Path::new(arg);
    let text = if p.is_file() {
        std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?
    } else {
        arg.replace(',', "\n")
    };
    let specs = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<ModelSpec>().map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Err(Error::Invalid("no models given".into()));
    }
    Ok(specs)
}

fn load_coastline(path: Option<&Path>) -> Result<Option<Vec<(f64, f64)>>> {
    path.map(io::read_coastline).transpose()
}

fn load_corrected(stations: &Path, corrected: &Path) -> Result<(windfuse_core::Dataset, windfuse_core::Dataset)> {
    let (raw, cor) = io::load_dataset(stations, corrected)?;
    let cor = cor.ok_or_else(|| Error::MissingColumn {
        path: corrected.to_path_buf(),
        column: "corrected_ms",
    })?;
    Ok((raw, cor))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::FitDist(a) => {
            let obs = io::read_observations(&a.observations)?;
            let samples: Vec<(String, Vec<f64>)> = obs.raw.iter().map(|s| (s.station_id.clone(), s.present())).collect();
            let summary = select_distribution(&samples);
            for (id, e) in &summary.failures {
                log::warn!("station {id}: {e}");
            }
            for (fam, s) in windfuse_core::distributions::DistFamily::ALL.iter().zip(&summary.families) {
                log::info!(
                    "{}: {} loglik wins, mean KS {:.4}, mean |p95 error| {:.4}",
                    fam.as_str(),
                    s.loglik_wins,
                    s.mean_ks,
                    s.mean_p95_abs_diff
                );
            }
            io::write_dist_fits(&a.out, &summary)
        }
        Command::Qc(a) => {
            let cfg = model_config(a.config.as_deref())?;
            let (ds, _) = io::load_dataset(&a.stations, &a.observations)?;
            let reports = quality_control(&ds, &cfg.qc.qc())?;
            log::info!("{} of {} stations passed", reports.iter().filter(|r| r.passed).count(), reports.len());
            io::write_qc(&a.out, &reports)
        }
        Command::BiasCorrect(a) => {
            let cfg = model_config(a.config.as_deref())?;
            let (ds, _) = io::load_dataset(&a.stations, &a.observations)?;
            let field = io::read_grid(&a.grid)?;
            let coast = load_coastline(a.coastline.as_deref())?;
            let bc = run_bias_correction(&ds, &field, coast.as_deref(), &cfg.bias)?;
            io::write_corrected(&a.out, &ds, &bc.corrected)?;
            io::write_calibration(&a.calib_report, &bc)?;
            io::write_calibration_summaries(&a.calib_report, &bc)?;
            Ok(())
        }
        Command::Fit(a) => {
            let cfg = model_config(a.config.as_deref())?;
            let mut spec = cfg.spec()?;
            if let Some(v) = &a.variant {
                spec.variant = parse_variant(v)?;
            }
            let fit_cfg = cfg.fit_config()?;
            let (raw, cor) = load_corrected(&a.stations, &a.corrected)?;
            let field = a.grid.as_deref().map(io::read_grid).transpose()?;
            let coast = load_coastline(a.coastline.as_deref())?;
            let (data, calibrator) = training_data(&raw, &cor, field.as_ref(), coast.as_deref(), &spec, &cfg)?;
            let model_fit = fit(&data, spec, &fit_cfg)?;
            log::info!("{spec}: log posterior {:.3} after {} iterations", model_fit.log_posterior, model_fit.iterations);
            let art = FitArtifact {
                format_version: FORMAT_VERSION,
                config_hash: cfg.hash(),
                config: cfg,
                model_fit,
                training: data,
                calibrator,
                coastline: coast,
            };
            io::write_json(&a.out, &art)
        }
        Command::Predict(a) => {
            let art: FitArtifact = io::read_json(&a.fit)?;
            art.check_version()?;
            let rows = io::read_targets(&a.targets)?;
            let targets = art.targets(&rows)?;
            let backend = parse_backend(&art.config.backend)?;
            let preds = predict(&art.model_fit, &art.training, &targets, backend)?;
            io::write_predictions(&a.out, &preds)
        }
        Command::PredictGrid(a) => {
            let art: FitArtifact = io::read_json(&a.fit)?;
            art.check_version()?;
            let data = &art.training;
            let times = if a.times.is_empty() {
                (0..data.n_times).collect()
            } else {
                a.times
                    .iter()
                    .map(|s| {
                        let off = parse_timestamp(s)? - data.t0;
                        let h = windfuse_core::model::HOUR;
                        if off < 0 || off % h != 0 || (off / h) as usize >= data.n_times {
                            return Err(Error::Invalid(format!("{s} is not a fitted hour")));
                        }
                        Ok((off / h) as usize)
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let grid = GridSpec {
                lat_min: a.lat_min,
                lat_max: a.lat_max,
                lon_min: a.lon_min,
                lon_max: a.lon_max,
                step: a.step,
            };
            let backend = parse_backend(&art.config.backend)?;
            let x1 = |lat: f64, lon: f64| art.covariate_at(lat, lon, None).ok().flatten();
            let preds = predict_grid(&art.model_fit, data, &grid, &times, x1, backend)?;
            io::write_grid_predictions(&a.out, &preds)
        }
        Command::Losocv(a) => {
            let cfg = model_config(a.config.as_deref())?;
            let specs = parse_models(&a.models)?;
            let cv = cfg.losocv_config()?;
            let (raw, cor) = load_corrected(&a.stations, &a.corrected)?;
            let field = a.grid.as_deref().map(io::read_grid).transpose()?;
            let coast = load_coastline(a.coastline.as_deref())?;
            let needs_x1 = specs.iter().find(|s| s.covariate).copied().unwrap_or(specs[0]);
            let (data, _) = training_data(&raw, &cor, field.as_ref(), coast.as_deref(), &needs_x1, &cfg)?;
            let mut ok = Vec::new();
            for (spec, r) in specs.iter().zip(losocv(&data, &specs, &cv, &Rayon)) {
                match r {
                    Ok(rep) => {
                        for f in &rep.failures {
                            log::warn!("{spec}: fold {} failed: {}", f.station_id, f.error);
                        }
                        log::info!("{spec}: RMSE {:.4} m/s, CRPS {:.4}", rep.rmse, rep.crps_sqrt);
                        ok.push(rep);
                    }
                    Err(e) => log::error!("{spec}: {e}"),
                }
            }
            if ok.is_empty() {
                return Err(Error::Invalid("every model failed".into()));
            }
            io::write_scores(&a.out, &ok)
        }
        Command::Evaluate(a) => {
            let preds = io::read_predictions(&a.pred)?;
            let truth = io::read_observations(&a.truth)?;
            let rep = evaluate_predictions(&a.model_id, &preds, &truth.raw, &a.percentiles)?;
            log::info!("RMSE {:.4} m/s, CRPS {:.4} over {} sites", rep.rmse, rep.crps_sqrt, rep.per_station.len());
            io::write_scores(&a.out, &[rep])
        }
        Command::Simulate(a) => {
            let sec: SimSection = match &a.config {
                Some(p) => load_toml(p)?,
                None => SimSection::default(),
            };
            let cfg = sec.simulation_config(&config_dir(a.config.as_deref()))?;
            let sim = simulate(&cfg)?;
            io::write_simulation(&a.out[0], &a.out[1], &sim)
        }
        Command::SimStudy(a) => {
            let sec: StudySection = match &a.config {
                Some(p) => load_toml(p)?,
                None => StudySection::default(),
            };
            let study = sec.study_config(&config_dir(a.config.as_deref()))?;
            let cells = run_simulation_study(&study, &Rayon);
            for c in cells.iter().filter(|c| c.error.is_some()) {
                log::warn!("cell σ={} {:?} {} rep {}: {}", c.noise, c.variant, c.strategy.as_str(), c.replication, c.error.as_deref().unwrap_or(""));
            }
            if let Some(p) = &a.cells {
                io::write_study_cells(p, &cells)?;
            }
            io::write_study_tables(&a.out[0], &a.out[1], &summarize(&cells))
        }
    }
}
