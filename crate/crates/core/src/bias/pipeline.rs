//! The full correction chain: gridded field → stations → calibration against
//! Met station fits → calibrated parameters everywhere → quantile mapping.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bias::calib::{fit_shape_calibration, leave_one_out_calibration, CalibModel, CalibRow, LooScore, ShapeCalibration};
use crate::bias::correct::{correct_series, validate_calibrated_distributions, CorrectedSeries, ValidationTable};
use crate::bias::idw::{idw_interpolate, GridParamField};
use crate::bias::spline::{fit_scale_calibration_with, ScaleCalibration};
use crate::distributions::{fit_mle, sqrt_weibull_mean, DistFamily};
use crate::error::{Error, Result};
use crate::geo::distance_to_polyline_km;
use crate::model::{Dataset, StationClass, StationRecord, WeibullParams};

/// Which Weibull parameters feed the covariate at Met stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetCovariate {
    /// Calibrated grid parameters, as at any unobserved site.
    #[default]
    Calibrated,
    /// The station's own maximum-likelihood fit.
    StationMle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasConfig {
    pub idw_power: f64,
    pub idw_k: usize,
    pub n_basis: usize,
    pub use_dist: bool,
    /// Classes whose series are quantile-mapped; the rest are kept raw.
    pub correct_classes: Vec<StationClass>,
    pub x1_at_met: MetCovariate,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            idw_power: 2.0,
            idw_k: 4,
            n_basis: 6,
            use_dist: true,
            correct_classes: alloc::vec![StationClass::A, StationClass::B, StationClass::C, StationClass::U],
            x1_at_met: MetCovariate::Calibrated,
        }
    }
}

/// Calibrated parameter field: IDW from the grid followed by the fitted
/// shape and scale models. Read-only once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub field: GridParamField,
    pub shape: ShapeCalibration,
    pub scale: ScaleCalibration,
    pub power: f64,
    pub k: usize,
}

impl Calibrator {
    pub fn gwa_at(&self, lat: f64, lon: f64) -> WeibullParams {
        idw_interpolate(&self.field, lat, lon, self.power, self.k)
    }

    /// Errors when the calibrated parameters leave the valid domain.
    pub fn params_at(&self, lat: f64, lon: f64, dist_km: f64) -> Result<WeibullParams> {
        let g = self.gwa_at(lat, lon);
        WeibullParams::new(self.shape.predict(g.shape), self.scale.predict(g.scale, dist_km))
    }

    /// E[√W] under the calibrated parameters.
    pub fn x1_at(&self, lat: f64, lon: f64, dist_km: f64) -> Result<f64> {
        Ok(sqrt_weibull_mean(&self.params_at(lat, lon, dist_km)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSite {
    pub station_id: String,
    pub class: StationClass,
    pub dist_to_sea_km: f64,
    pub gwa: WeibullParams,
    pub calibrated: WeibullParams,
    /// Only fitted at Met stations.
    pub station_mle: Option<WeibullParams>,
    pub x1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCorrection {
    pub calibrator: Calibrator,
    /// One per station, in dataset order.
    pub sites: Vec<CalibratedSite>,
    /// Raw values replaced by corrected ones for the corrected classes.
    pub corrected: Dataset,
    pub series: Vec<CorrectedSeries>,
    pub loo_shape: Option<Vec<LooScore>>,
    pub loo_scale: Option<Vec<LooScore>>,
    pub validation: ValidationTable,
}

impl BiasCorrection {
    /// Covariate per station in dataset order.
    pub fn x1(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.x1).collect()
    }
}

fn station_distance(st: &StationRecord, coastline: Option<&[(f64, f64)]>, needed: bool) -> Result<f64> {
    if let Some(d) = st.dist_to_sea_km {
        return Ok(d);
    }
    match coastline {
        Some(c) if !c.is_empty() => Ok(distance_to_polyline_km(st.lat, st.lon, c)),
        _ if !needed => Ok(0.0),
        _ => Err(Error::MissingCovariate(alloc::format!(
            "distance to sea for station {} (supply it or a coastline)",
            st.id
        ))),
    }
}

/// Run the whole chain on `ds`. Met stations supply the ground truth for
/// calibration and are never quantile-mapped.
pub fn run_bias_correction(
    ds: &Dataset,
    field: &GridParamField,
    coastline: Option<&[(f64, f64)]>,
    cfg: &BiasConfig,
) -> Result<BiasCorrection> {
    if !(cfg.idw_power > 0.0) || cfg.idw_k == 0 {
        return Err(Error::InvalidConfig(String::from("idw power must be positive and k at least 1")));
    }
    if cfg.correct_classes.contains(&StationClass::Met) {
        return Err(Error::InvalidConfig(String::from("Met stations are the reference and cannot be corrected")));
    }
    let dists = ds
        .stations
        .iter()
        .map(|s| station_distance(s, coastline, cfg.use_dist))
        .collect::<Result<Vec<f64>>>()?;
    let gwa: Vec<WeibullParams> = ds
        .stations
        .iter()
        .map(|s| idw_interpolate(field, s.lat, s.lon, cfg.idw_power, cfg.idw_k))
        .collect();

    let mut mle: Vec<Option<WeibullParams>> = alloc::vec![None; ds.n_sites()];
    let mut shape_pairs = Vec::new();
    let mut scale_rows = Vec::new();
    for (s, st) in ds.stations.iter().enumerate() {
        if st.class != StationClass::Met {
            continue;
        }
        let sample = ds.series(s).present();
        let f = fit_mle(DistFamily::Weibull, &sample)?;
        let p = WeibullParams::new(f.params[0], f.params[1])?;
        mle[s] = Some(p);
        shape_pairs.push((gwa[s].shape, p.shape));
        scale_rows.push(CalibRow {
            gwa: gwa[s].scale,
            dist_km: dists[s],
            met: p.scale,
        });
    }
    let shape = fit_shape_calibration(&shape_pairs)?;
    let scale = fit_scale_calibration_with(&scale_rows, cfg.n_basis, cfg.use_dist, None)?;
    let calibrator = Calibrator {
        field: field.clone(),
        shape,
        scale,
        power: cfg.idw_power,
        k: cfg.idw_k,
    };

    let mut sites = Vec::with_capacity(ds.n_sites());
    for (s, st) in ds.stations.iter().enumerate() {
        let calibrated = calibrator.params_at(st.lat, st.lon, dists[s])?;
        let x1 = match (cfg.x1_at_met, mle[s]) {
            (MetCovariate::StationMle, Some(p)) => sqrt_weibull_mean(&p),
            _ => sqrt_weibull_mean(&calibrated),
        };
        sites.push(CalibratedSite {
            station_id: st.id.clone(),
            class: st.class,
            dist_to_sea_km: dists[s],
            gwa: gwa[s],
            calibrated,
            station_mle: mle[s],
            x1,
        });
    }

    let mut values = ds.values.clone();
    let mut series = Vec::new();
    for (s, st) in ds.stations.iter().enumerate() {
        if !cfg.correct_classes.contains(&st.class) {
            continue;
        }
        let c = correct_series(&ds.series(s), &sites[s].calibrated)?;
        values[s] = c.values.clone();
        series.push(c);
    }
    let corrected = ds.with_values(values)?;

    let loo_shape = loo(
        &shape_pairs
            .iter()
            .map(|&(g, m)| CalibRow { gwa: g, dist_km: 0.0, met: m })
            .collect::<Vec<_>>(),
        &[CalibModel::Identity, CalibModel::Linear],
        "shape",
    );
    let loo_scale = loo(&scale_rows, &CalibModel::ALL, "scale");

    let met: Vec<(String, Vec<f64>, WeibullParams)> = ds
        .stations
        .iter()
        .enumerate()
        .filter(|(_, st)| st.class == StationClass::Met)
        .map(|(s, st)| (st.id.clone(), ds.series(s).present(), sites[s].calibrated))
        .collect();
    let validation = validate_calibrated_distributions(&met)?;

    Ok(BiasCorrection {
        calibrator,
        sites,
        corrected,
        series,
        loo_shape,
        loo_scale,
        validation,
    })
}

fn loo(rows: &[CalibRow], models: &[CalibModel], what: &str) -> Option<Vec<LooScore>> {
    match leave_one_out_calibration(rows, models) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("leave-one-out {what} calibration skipped: {e}");
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::idw::GridPoint;
    use crate::model::WindSeries;
    use crate::qc::spearman;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Weibull};

    fn field() -> GridParamField {
        let mut pts = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                let lat = 52.0 + 0.5 * i as f64;
                let lon = -10.0 + 0.5 * j as f64;
                pts.push(GridPoint {
                    lon,
                    lat,
                    params: WeibullParams {
                        shape: 1.8 + 0.05 * i as f64,
                        scale: 5.0 + 0.4 * j as f64,
                    },
                });
            }
        }
        GridParamField::new(pts).unwrap()
    }

    fn dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = field();
        let mut stations = Vec::new();
        let mut series = Vec::new();
        let n = 2000;
        for s in 0..16 {
            let class = if s < 12 { StationClass::Met } else { StationClass::A };
            let lat = rng.random_range(52.2..55.8);
            let lon = rng.random_range(-9.8..-6.2);
            let mut st = StationRecord::new(alloc::format!("S{s:02}"), lat, lon, class);
            st.dist_to_sea_km = Some(rng.random_range(0.0..50.0));
            let g = idw_interpolate(&f, lat, lon, 2.0, 4);
            let w = Weibull::new(0.9 * g.scale, 0.1 + g.shape).unwrap();
            let offset = if class == StationClass::Met { 0.0 } else { 2.0 };
            let v: Vec<Option<f64>> = (0..n).map(|_| Some(w.sample(&mut rng) + offset)).collect();
            series.push(WindSeries::new(st.id.clone(), 0, v));
            stations.push(st);
        }
        crate::model::validate_dataset(stations, series).unwrap()
    }

    #[test]
    fn chain_is_deterministic_and_keeps_met_raw() {
        let ds = dataset(5);
        let cfg = BiasConfig::default();
        let a = run_bias_correction(&ds, &field(), None, &cfg).unwrap();
        let b = run_bias_correction(&ds, &field(), None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series.len(), 4);
        for (s, st) in ds.stations.iter().enumerate() {
            if st.class == StationClass::Met {
                assert_eq!(a.corrected.values[s], ds.values[s]);
            } else {
                let r = spearman(&a.corrected.values[s], &ds.values[s]).unwrap();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
        assert!(a.loo_shape.is_some() && a.loo_scale.is_some());
        assert!(a.validation.metrics[0].pearson_r.unwrap() > 0.9);
    }

    #[test]
    fn calibration_absorbs_grid_bias() {
        let ds = dataset(9);
        let out = run_bias_correction(&ds, &field(), None, &BiasConfig::default()).unwrap();
        for site in out.sites.iter().filter(|s| s.class == StationClass::Met) {
            let m = site.station_mle.unwrap();
            assert!((site.calibrated.scale - m.scale).abs() < 0.05 * m.scale);
            assert!((site.calibrated.shape - m.shape).abs() < 0.1);
        }
    }

    #[test]
    fn covariate_source_and_distance_errors() {
        let ds = dataset(2);
        let cfg = BiasConfig {
            x1_at_met: MetCovariate::StationMle,
            ..BiasConfig::default()
        };
        let out = run_bias_correction(&ds, &field(), None, &cfg).unwrap();
        let met = &out.sites[0];
        assert_eq!(met.x1, sqrt_weibull_mean(&met.station_mle.unwrap()));

        let mut no_dist = ds.clone();
        no_dist.stations[3].dist_to_sea_km = None;
        assert!(matches!(
            run_bias_correction(&no_dist, &field(), None, &BiasConfig::default()),
            Err(Error::MissingCovariate(_))
        ));
        let coast = [(56.0, -11.0), (56.0, -5.0)];
        assert!(run_bias_correction(&no_dist, &field(), Some(&coast), &BiasConfig::default()).is_ok());

        let bad = BiasConfig {
            correct_classes: alloc::vec![StationClass::Met],
            ..BiasConfig::default()
        };
        assert!(run_bias_correction(&ds, &field(), None, &bad).is_err());
    }
}
