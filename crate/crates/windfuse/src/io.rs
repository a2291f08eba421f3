//! CSV readers and writers for every file the command line touches.
//!
//! Missing observations are simply absent rows; empty cells are read as
//! missing wherever a column is optional.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use windfuse_core::bias::{BiasCorrection, GridParamField, GridPoint};
use windfuse_core::distributions::SelectionSummary;
use windfuse_core::eval::ScoreReport;
use windfuse_core::gp::predict::GridPrediction;
use windfuse_core::gp::Prediction;
use windfuse_core::model::{validate_dataset, HOUR};
use windfuse_core::qc::QcReport;
use windfuse_core::sim::{CellResult, SimulatedDataset, SummaryRow};
use windfuse_core::{Dataset, StationClass, StationRecord, Timestamp, WeibullParams, WindSeries};

use crate::error::{Error, Result};
use crate::time::{format_timestamp, parse_timestamp};

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(BufReader::new(f)))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn require(path: &Path, rdr: &mut csv::Reader<BufReader<File>>, cols: &[&'static str]) -> Result<()> {
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    for &c in cols {
        if !headers.iter().any(|h| h == c) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: c,
            });
        }
    }
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path, cols: &[&'static str]) -> Result<Vec<T>> {
    let mut rdr = csv_reader(path)?;
    require(path, &mut rdr, cols)?;
    rdr.deserialize().map(|r| r.map_err(csv_err(path))).collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn bad(path: &Path, record: usize, msg: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        record: record as u64 + 1,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------- stations

#[derive(Debug, Serialize, Deserialize)]
struct StationRow {
    id: String,
    lat: f64,
    lon: f64,
    class: String,
    dist_to_sea_km: Option<f64>,
}

/// `id,lat,lon,class,dist_to_sea_km` with class MET, A, B, C or U.
pub fn read_stations(path: &Path) -> Result<Vec<StationRecord>> {
    let rows: Vec<StationRow> = read_rows(path, &["id", "lat", "lon", "class"])?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let class: StationClass = r.class.parse().map_err(|e: windfuse_core::Error| bad(path, i, e.to_string()))?;
            let mut s = StationRecord::new(r.id, r.lat, r.lon, class);
            s.dist_to_sea_km = r.dist_to_sea_km;
            Ok(s)
        })
        .collect()
}

pub fn write_stations(path: &Path, stations: &[StationRecord]) -> Result<()> {
    write_rows(
        path,
        stations.iter().map(|s| StationRow {
            id: s.id.clone(),
            lat: s.lat,
            lon: s.lon,
            class: s.class.as_str().to_string(),
            dist_to_sea_km: s.dist_to_sea_km,
        }),
    )
}

// ------------------------------------------------------------ observations

#[derive(Debug, Deserialize)]
struct ObsRow {
    station_id: String,
    timestamp: String,
    wind_speed_ms: Option<f64>,
    #[serde(default)]
    corrected_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ObsOut<'a> {
    station_id: &'a str,
    timestamp: String,
    wind_speed_ms: f64,
}

#[derive(Debug, Serialize)]
struct CorrectedOut<'a> {
    station_id: &'a str,
    timestamp: String,
    wind_speed_ms: f64,
    corrected_ms: Option<f64>,
}

/// Raw series and, when the file has a `corrected_ms` column, the corrected
/// ones. Each series spans its own first to last timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    pub raw: Vec<WindSeries>,
    pub corrected: Option<Vec<WindSeries>>,
}

fn to_series(map: BTreeMap<String, BTreeMap<Timestamp, Option<f64>>>) -> Vec<WindSeries> {
    map.into_iter()
        .filter_map(|(id, obs)| {
            let (&t0, _) = obs.iter().next()?;
            let (&t1, _) = obs.iter().next_back()?;
            let mut v = vec![None; ((t1 - t0) / HOUR + 1) as usize];
            for (t, x) in obs {
                v[((t - t0) / HOUR) as usize] = x;
            }
            Some(WindSeries::new(id, t0, v))
        })
        .collect()
}

/// `station_id,timestamp,wind_speed_ms[,corrected_ms]`.
pub fn read_observations(path: &Path) -> Result<ObservationTable> {
    let mut rdr = csv_reader(path)?;
    require(path, &mut rdr, &["station_id", "timestamp", "wind_speed_ms"])?;
    let has_corrected = rdr.headers().map_err(csv_err(path))?.iter().any(|h| h == "corrected_ms");
    let mut raw: BTreeMap<String, BTreeMap<Timestamp, Option<f64>>> = BTreeMap::new();
    let mut cor: BTreeMap<String, BTreeMap<Timestamp, Option<f64>>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<ObsRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let t = parse_timestamp(&row.timestamp)?;
        if t.rem_euclid(HOUR) != 0 {
            return Err(bad(path, i, format!("timestamp {} is not on the hour", row.timestamp)));
        }
        if raw.entry(row.station_id.clone()).or_default().insert(t, row.wind_speed_ms).is_some() {
            return Err(bad(path, i, format!("duplicate row for {} at {}", row.station_id, row.timestamp)));
        }
        if has_corrected {
            cor.entry(row.station_id).or_default().insert(t, row.corrected_ms);
        }
    }
    Ok(ObservationTable {
        raw: to_series(raw),
        corrected: has_corrected.then(|| to_series(cor)),
    })
}

/// Present values only, station by station.
pub fn write_observations(path: &Path, ds: &Dataset) -> Result<()> {
    let rows = ds.stations.iter().enumerate().flat_map(|(s, st)| {
        ds.values[s].iter().enumerate().filter_map(move |(t, v)| {
            v.map(|x| ObsOut {
                station_id: &st.id,
                timestamp: format_timestamp(ds.timestamp(t)),
                wind_speed_ms: x,
            })
        })
    });
    write_rows(path, rows)
}

/// Observation rows of `raw` plus the matching `corrected` value.
pub fn write_corrected(path: &Path, raw: &Dataset, corrected: &Dataset) -> Result<()> {
    if raw.n_sites() != corrected.n_sites() || raw.n_times != corrected.n_times || raw.t0 != corrected.t0 {
        return Err(Error::Invalid("raw and corrected datasets do not share a layout".into()));
    }
    let rows = raw.stations.iter().enumerate().flat_map(|(s, st)| {
        raw.values[s].iter().enumerate().filter_map(move |(t, v)| {
            v.map(|x| CorrectedOut {
                station_id: &st.id,
                timestamp: format_timestamp(raw.timestamp(t)),
                wind_speed_ms: x,
                corrected_ms: corrected.values[s][t],
            })
        })
    });
    write_rows(path, rows)
}

/// Validated raw dataset and, if present, the corrected one on the same axis.
pub fn load_dataset(stations: &Path, observations: &Path) -> Result<(Dataset, Option<Dataset>)> {
    let st = read_stations(stations)?;
    let obs = read_observations(observations)?;
    let raw = validate_dataset(st.clone(), obs.raw)?;
    let corrected = match obs.corrected {
        Some(c) => {
            let c = validate_dataset(st, c)?;
            // present-or-absent rows are shared, so the axes agree unless a
            // whole series is empty in one column only
            Some(align(&raw, c)?)
        }
        None => None,
    };
    Ok((raw, corrected))
}

fn align(reference: &Dataset, other: Dataset) -> Result<Dataset> {
    if other.t0 == reference.t0 && other.n_times == reference.n_times {
        return Ok(other);
    }
    let mut values = vec![vec![None; reference.n_times]; reference.n_sites()];
    for (s, row) in other.values.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            if v.is_some() {
                let k = (other.timestamp(t) - reference.t0) / HOUR;
                if k < 0 || k as usize >= reference.n_times {
                    return Err(Error::Invalid("corrected values outside the raw time axis".into()));
                }
                values[s][k as usize] = *v;
            }
        }
    }
    Ok(reference.with_values(values)?)
}

// --------------------------------------------------------- grid, coastline

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    lon: f64,
    lat: f64,
    shape: f64,
    scale: f64,
}

/// `lon,lat,shape,scale`, one row per grid node.
pub fn read_grid(path: &Path) -> Result<GridParamField> {
    let rows: Vec<GridRow> = read_rows(path, &["lon", "lat", "shape", "scale"])?;
    let pts = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let params = WeibullParams::new(r.shape, r.scale).map_err(|e| bad(path, i, e.to_string()))?;
            Ok(GridPoint {
                lon: r.lon,
                lat: r.lat,
                params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridParamField::new(pts)?)
}

pub fn write_grid(path: &Path, field: &GridParamField) -> Result<()> {
    write_rows(
        path,
        field.points().iter().map(|p| GridRow {
            lon: p.lon,
            lat: p.lat,
            shape: p.params.shape,
            scale: p.params.scale,
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct Vertex {
    lat: f64,
    lon: f64,
}

/// `lat,lon` polyline vertices in order.
pub fn read_coastline(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows: Vec<Vertex> = read_rows(path, &["lat", "lon"])?;
    if rows.len() < 2 {
        return Err(Error::Invalid(format!("{}: a coastline needs at least two vertices", path.display())));
    }
    Ok(rows.into_iter().map(|v| (v.lat, v.lon)).collect())
}

// ------------------------------------------------------ targets, predictions

/// One prediction request. Covariate and class are optional; a missing class
/// means a Met-quality target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub site_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: String,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(default)]
    pub dist_to_sea_km: Option<f64>,
    #[serde(default)]
    pub x1: Option<f64>,
}

/// `site_id,lat,lon,timestamp[,class][,dist_to_sea_km][,x1]`.
pub fn read_targets(path: &Path) -> Result<Vec<TargetRow>> {
    read_rows(path, &["site_id", "lat", "lon", "timestamp"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub site_id: String,
    pub timestamp: String,
    pub mean_sqrt: f64,
    pub sd_sqrt: f64,
    pub mean_ms: f64,
}

impl From<&Prediction> for PredictionRow {
    fn from(p: &Prediction) -> Self {
        PredictionRow {
            site_id: p.site_id.clone(),
            timestamp: format_timestamp(p.timestamp),
            mean_sqrt: p.mean_sqrt,
            sd_sqrt: p.sd_sqrt,
            mean_ms: p.mean_ms,
        }
    }
}

/// `site_id,timestamp,mean_sqrt,sd_sqrt,mean_ms`.
pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    write_rows(path, preds.iter().map(PredictionRow::from))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    read_rows(path, &["site_id", "timestamp", "mean_sqrt", "sd_sqrt", "mean_ms"])
}

#[derive(Debug, Serialize)]
struct GridOut {
    lat: f64,
    lon: f64,
    timestamp: String,
    mean_sqrt: Option<f64>,
    sd_sqrt: Option<f64>,
    mean_ms: Option<f64>,
}

/// Nodes outside the covariate field have empty prediction cells.
pub fn write_grid_predictions(path: &Path, preds: &[GridPrediction]) -> Result<()> {
    write_rows(
        path,
        preds.iter().map(|g| GridOut {
            lat: g.lat,
            lon: g.lon,
            timestamp: format_timestamp(g.timestamp),
            mean_sqrt: g.prediction.map(|p| p.0),
            sd_sqrt: g.prediction.map(|p| p.1),
            mean_ms: g.prediction.map(|p| p.2),
        }),
    )
}

// ------------------------------------------------------------------ reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model_id: String,
    /// `overall`, `station` or `extreme`.
    pub scope: String,
    /// Station id or upper-tail percentage; empty for `overall`.
    pub key: String,
    pub n: usize,
    pub rmse: f64,
    pub crps_sqrt: Option<f64>,
    pub bias: Option<f64>,
    pub pearson_r: Option<f64>,
}

pub fn score_rows(r: &ScoreReport) -> Vec<ScoreRow> {
    let n_total = r.per_station.iter().map(|s| s.n).sum();
    let mut rows = vec![ScoreRow {
        model_id: r.model_id.clone(),
        scope: "overall".into(),
        key: String::new(),
        n: n_total,
        rmse: r.rmse,
        crps_sqrt: Some(r.crps_sqrt),
        bias: None,
        pearson_r: None,
    }];
    rows.extend(r.per_station.iter().map(|s| ScoreRow {
        model_id: r.model_id.clone(),
        scope: "station".into(),
        key: s.station_id.clone(),
        n: s.n,
        rmse: s.rmse,
        crps_sqrt: Some(s.crps),
        bias: None,
        pearson_r: None,
    }));
    rows.extend(r.extreme.iter().map(|e| ScoreRow {
        model_id: r.model_id.clone(),
        scope: "extreme".into(),
        key: e.percentile.to_string(),
        n: e.n,
        rmse: e.rmse,
        crps_sqrt: None,
        bias: Some(e.bias),
        pearson_r: e.pearson_r,
    }));
    rows
}

/// `model_id,scope,key,n,rmse,crps_sqrt,bias,pearson_r`.
pub fn write_scores(path: &Path, reports: &[ScoreReport]) -> Result<()> {
    write_rows(path, reports.iter().flat_map(score_rows))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    read_rows(path, &["model_id", "scope", "key", "n", "rmse"])
}

#[derive(Debug, Serialize)]
struct FitOut<'a> {
    station_id: &'a str,
    family: &'static str,
    param1: f64,
    param2: f64,
    loglik: f64,
    ks: f64,
    p95diff: f64,
}

/// `station_id,family,param1,param2,loglik,ks,p95diff`.
pub fn write_dist_fits(path: &Path, summary: &SelectionSummary) -> Result<()> {
    write_rows(
        path,
        summary.fits.iter().flat_map(|(id, fits)| {
            fits.iter().map(move |f| FitOut {
                station_id: id,
                family: f.family.as_str(),
                param1: f.params[0],
                param2: f.params[1],
                loglik: f.loglik,
                ks: f.ks_stat,
                p95diff: f.p95_abs_diff,
            })
        }),
    )
}

#[derive(Debug, Serialize)]
struct QcOut<'a> {
    station_id: &'a str,
    frac_present: f64,
    n_good_neighbours: usize,
    passed: bool,
    fail_reasons: String,
}

/// `station_id,frac_present,n_good_neighbours,passed,fail_reasons`, reasons
/// joined with `;`.
pub fn write_qc(path: &Path, reports: &[QcReport]) -> Result<()> {
    write_rows(
        path,
        reports.iter().map(|r| QcOut {
            station_id: &r.station_id,
            frac_present: r.frac_present,
            n_good_neighbours: r.n_good_neighbours,
            passed: r.passed,
            fail_reasons: r.fail_reasons.join(";"),
        }),
    )
}

#[derive(Debug, Serialize)]
struct CalibOut<'a> {
    station_id: &'a str,
    class: &'static str,
    dist_to_sea_km: f64,
    gwa_shape: f64,
    gwa_scale: f64,
    calibrated_shape: f64,
    calibrated_scale: f64,
    mle_shape: Option<f64>,
    mle_scale: Option<f64>,
    x1: f64,
}

/// Per-station calibration report.
pub fn write_calibration(path: &Path, bc: &BiasCorrection) -> Result<()> {
    write_rows(
        path,
        bc.sites.iter().map(|s| CalibOut {
            station_id: &s.station_id,
            class: s.class.as_str(),
            dist_to_sea_km: s.dist_to_sea_km,
            gwa_shape: s.gwa.shape,
            gwa_scale: s.gwa.scale,
            calibrated_shape: s.calibrated.shape,
            calibrated_scale: s.calibrated.scale,
            mle_shape: s.station_mle.map(|p| p.shape),
            mle_scale: s.station_mle.map(|p| p.scale),
            x1: s.x1,
        }),
    )
}

#[derive(Debug, Serialize)]
struct LooOut {
    parameter: &'static str,
    model: &'static str,
    rmse: f64,
}

#[derive(Debug, Serialize)]
struct ValidationOut<'a> {
    metric: &'a str,
    mae: f64,
    pearson_r: Option<f64>,
}

/// Leave-one-out calibration scores and the moment validation table, as two
/// small CSVs next to `path` (`*_loo.csv`, `*_validation.csv`).
pub fn write_calibration_summaries(path: &Path, bc: &BiasCorrection) -> Result<(PathBuf, PathBuf)> {
    let loo_path = sibling(path, "loo");
    let val_path = sibling(path, "validation");
    let shape = bc.loo_shape.iter().flatten().map(|s| LooOut {
        parameter: "shape",
        model: s.model.as_str(),
        rmse: s.rmse,
    });
    let scale = bc.loo_scale.iter().flatten().map(|s| LooOut {
        parameter: "scale",
        model: s.model.as_str(),
        rmse: s.rmse,
    });
    write_rows(&loo_path, shape.chain(scale))?;
    write_rows(
        &val_path,
        bc.validation.metrics.iter().map(|m| ValidationOut {
            metric: &m.metric,
            mae: m.mae,
            pearson_r: m.pearson_r,
        }),
    )?;
    Ok((loo_path, val_path))
}

/// `dir/stem_<suffix>.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

// -------------------------------------------------------------- simulation

#[derive(Debug, Serialize)]
struct SimObsOut<'a> {
    station_id: &'a str,
    timestamp: String,
    value: f64,
    latent: f64,
    junk: bool,
}

/// Simulated values are Gaussian on the model scale and may be negative,
/// so they get their own schema: `station_id,timestamp,value,latent,junk`.
pub fn write_simulation(obs_path: &Path, stations_path: &Path, sim: &SimulatedDataset) -> Result<()> {
    write_stations(stations_path, &sim.stations)?;
    let rows = sim.stations.iter().enumerate().flat_map(|(s, st)| {
        (0..sim.config.n_times).map(move |t| SimObsOut {
            station_id: &st.id,
            timestamp: format_timestamp(sim.t0 + t as i64 * HOUR),
            value: sim.obs[s][t],
            latent: sim.z[s][t],
            junk: sim.junk[s],
        })
    });
    write_rows(obs_path, rows)
}

#[derive(Debug, Serialize)]
struct PerfOut {
    noise: f64,
    variant: &'static str,
    strategy: &'static str,
    n_ok: usize,
    n_failed: usize,
    rmse: f64,
    crps: f64,
}

#[derive(Debug, Serialize)]
struct ParamOut {
    noise: f64,
    variant: &'static str,
    strategy: &'static str,
    phi: f64,
    sigma_z: f64,
    rho: Option<f64>,
    sigma_met: f64,
    sigma_pws1: Option<f64>,
    sigma_pws2: Option<f64>,
}

fn variant_name(v: windfuse_core::gp::Variant) -> &'static str {
    match v {
        windfuse_core::gp::Variant::Igp => "igp",
        windfuse_core::gp::Variant::Ar1 => "ar1",
    }
}

/// Strategy performance (RMSE, CRPS) and fitted-parameter tables.
pub fn write_study_tables(perf: &Path, params: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(
        perf,
        rows.iter().map(|r| PerfOut {
            noise: r.noise,
            variant: variant_name(r.variant),
            strategy: r.strategy.as_str(),
            n_ok: r.n_ok,
            n_failed: r.n_failed,
            rmse: r.rmse,
            crps: r.crps,
        }),
    )?;
    write_rows(
        params,
        rows.iter().map(|r| ParamOut {
            noise: r.noise,
            variant: variant_name(r.variant),
            strategy: r.strategy.as_str(),
            phi: r.phi,
            sigma_z: r.sigma_z,
            rho: r.rho,
            sigma_met: r.sigma_met,
            sigma_pws1: r.sigma_pws1,
            sigma_pws2: r.sigma_pws2,
        }),
    )
}

#[derive(Debug, Serialize)]
struct CellOut<'a> {
    noise: f64,
    variant: &'static str,
    strategy: &'static str,
    replication: usize,
    seed: u64,
    rmse: f64,
    crps: f64,
    failed_folds: usize,
    phi: Option<f64>,
    sigma_z: Option<f64>,
    rho: Option<f64>,
    sigma_met: Option<f64>,
    sigma_pws1: Option<f64>,
    sigma_pws2: Option<f64>,
    error: Option<&'a str>,
}

/// One row per replication.
pub fn write_study_cells(path: &Path, cells: &[CellResult]) -> Result<()> {
    write_rows(
        path,
        cells.iter().map(|c| CellOut {
            noise: c.noise,
            variant: variant_name(c.variant),
            strategy: c.strategy.as_str(),
            replication: c.replication,
            seed: c.seed,
            rmse: c.rmse,
            crps: c.crps,
            failed_folds: c.failed_folds,
            phi: c.hyper.map(|h| h.phi),
            sigma_z: c.hyper.map(|h| h.sigma_z),
            rho: c.hyper.and_then(|h| h.rho),
            sigma_met: c.hyper.map(|h| h.nugget_sd(StationClass::Met)),
            sigma_pws1: c.hyper.map(|h| h.nugget_sd(StationClass::A)),
            sigma_pws2: c.hyper.map(|h| h.nugget_sd(StationClass::U)),
            error: c.error.as_deref(),
        }),
    )
}

// -------------------------------------------------------------------- json

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(BufReader::new(f)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
