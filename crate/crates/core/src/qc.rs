//! Station quality control: completeness threshold, rank transforms and the
//! Spearman nearest-neighbour filter.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine_km;
use crate::model::{Dataset, StationClass};
use crate::stats::{average_ranks, pearson, total_cmp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcConfig {
    pub missing_threshold: f64,
    pub min_neighbours: usize,
    pub rho_min: f64,
    /// Size of the nearest-station candidate set (at least `min_neighbours`).
    pub candidate_set: usize,
}

impl Default for QcConfig {
    fn default() -> Self {
        QcConfig {
            missing_threshold: 0.9,
            min_neighbours: 5,
            rho_min: 0.5,
            candidate_set: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourCheck {
    pub neighbour_id: String,
    pub distance_km: f64,
    /// `None` when the pair has too little overlap or constant ranks.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub station_id: String,
    pub frac_present: f64,
    pub neighbour_checks: Vec<NeighbourCheck>,
    pub n_good_neighbours: usize,
    pub passed: bool,
    pub fail_reasons: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingCheck {
    pub passed: bool,
    pub frac_present: f64,
}

pub fn missing_data_filter(values: &[Option<f64>], threshold: f64) -> MissingCheck {
    if values.is_empty() {
        return MissingCheck {
            passed: false,
            frac_present: 0.0,
        };
    }
    let present = values.iter().filter(|v| v.is_some()).count();
    let frac = present as f64 / values.len() as f64;
    MissingCheck {
        passed: present > 0 && frac >= threshold,
        frac_present: frac,
    }
}

/// Present values mapped to (average rank)/n; missing stays missing.
pub fn rank_transform(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: present.len(),
        });
    }
    if present.iter().all(|&v| v == present[0]) {
        return Err(Error::DegenerateRanks);
    }
    let n = present.len() as f64;
    let mut ranks = average_ranks(&present).into_iter();
    Ok(values
        .iter()
        .map(|v| v.map(|_| ranks.next().expect("one rank per present value") / n))
        .collect())
}

fn common_support(a: &[Option<f64>], b: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip()
}

/// Spearman rank correlation over the time points where both are present.
pub fn spearman(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64> {
    let (x, y) = common_support(a, b);
    if x.len() < 3 {
        return Err(Error::InsufficientOverlap {
            needed: 3,
            got: x.len(),
        });
    }
    pearson(&average_ranks(&x), &average_ranks(&y)).ok_or(Error::DegenerateRanks)
}

fn pair_distance(ds: &Dataset, i: usize, j: usize) -> f64 {
    let (a, b) = (&ds.stations[i], &ds.stations[j]);
    haversine_km(a.lat, a.lon, b.lat, b.lon)
}

/// Neighbour check for every station; Met stations pass by construction.
/// Reports are sorted by station id.
pub fn neighbour_filter(ds: &Dataset, cfg: &QcConfig) -> Result<Vec<QcReport>> {
    let n = ds.n_sites();
    if n < cfg.min_neighbours + 1 {
        return Err(Error::InsufficientNeighbours {
            needed: cfg.min_neighbours,
            got: n.saturating_sub(1),
        });
    }
    let k = cfg.candidate_set.max(cfg.min_neighbours);
    let mut reports = Vec::with_capacity(n);
    for i in 0..n {
        let st = &ds.stations[i];
        let frac = missing_data_filter(&ds.values[i], cfg.missing_threshold).frac_present;
        let mut others: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (pair_distance(ds, i, j), j)).collect();
        others.sort_by(|a, b| total_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
        others.truncate(k);
        let checks: Vec<NeighbourCheck> = others
            .iter()
            .map(|&(d, j)| NeighbourCheck {
                neighbour_id: ds.stations[j].id.clone(),
                distance_km: d,
                rho: spearman(&ds.values[i], &ds.values[j]).ok(),
            })
            .collect();
        let good = checks
            .iter()
            .filter(|c| c.rho.is_some_and(|r| r > cfg.rho_min))
            .count();
        let mut fail_reasons = Vec::new();
        if st.class != StationClass::Met && good < cfg.min_neighbours {
            fail_reasons.push(format!(
                "only {good} of {} nearest neighbours with spearman > {}",
                checks.len(),
                cfg.rho_min
            ));
        }
        reports.push(QcReport {
            station_id: st.id.clone(),
            frac_present: frac,
            neighbour_checks: checks,
            n_good_neighbours: good,
            passed: fail_reasons.is_empty(),
            fail_reasons,
        });
    }
    reports.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    Ok(reports)
}

/// Completeness check followed by the neighbour filter (PWS only; Met
/// stations are never removed).
pub fn quality_control(ds: &Dataset, cfg: &QcConfig) -> Result<Vec<QcReport>> {
    let mut reports = neighbour_filter(ds, cfg)?;
    for r in &mut reports {
        let i = ds.station_index(&r.station_id).expect("report for a known station");
        let m = missing_data_filter(&ds.values[i], cfg.missing_threshold);
        if ds.stations[i].class != StationClass::Met && !m.passed {
            r.fail_reasons.insert(
                0,
                format!("fraction present {:.3} below {}", m.frac_present, cfg.missing_threshold),
            );
            r.passed = false;
        }
    }
    Ok(reports)
}

/// Drop stations whose report failed; surviving values are untouched.
pub fn apply_reports(ds: &Dataset, reports: &[QcReport]) -> Dataset {
    ds.filter_stations(|_, s| {
        reports
            .iter()
            .find(|r| r.station_id == s.id)
            .is_none_or(|r| r.passed)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationMode {
    /// Spearman correlation of the level series.
    Levels,
    /// Pearson correlation of hour-to-hour increments.
    Increments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: String,
    pub b: String,
    pub distance_km: f64,
    pub rho: Option<f64>,
    pub classes: (StationClass, StationClass),
}

fn increments(v: &[Option<f64>]) -> Vec<Option<f64>> {
    v.windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        })
        .collect()
}

/// Every station pair accepted by `keep` with its distance and correlation.
pub fn correlation_vs_distance<F: Fn(StationClass, StationClass) -> bool>(
    ds: &Dataset,
    keep: F,
    mode: CorrelationMode,
) -> Vec<PairCorrelation> {
    let series: Vec<Vec<Option<f64>>> = match mode {
        CorrelationMode::Levels => ds.values.clone(),
        CorrelationMode::Increments => ds.values.iter().map(|v| increments(v)).collect(),
    };
    let mut rows = Vec::new();
    for i in 0..ds.n_sites() {
        for j in i + 1..ds.n_sites() {
            let (ci, cj) = (ds.stations[i].class, ds.stations[j].class);
            if !keep(ci, cj) {
                continue;
            }
            let rho = match mode {
                CorrelationMode::Levels => spearman(&series[i], &series[j]).ok(),
                CorrelationMode::Increments => {
                    let (x, y) = common_support(&series[i], &series[j]);
                    pearson(&x, &y)
                }
            };
            rows.push(PairCorrelation {
                a: ds.stations[i].id.clone(),
                b: ds.stations[j].id.clone(),
                distance_km: pair_distance(ds, i, j),
                rho,
                classes: (ci, cj),
            });
        }
    }
    rows
}

/// Least-squares fit of ln ρ = a − b·d over rows with ρ > 0; returns (a, b).
pub fn exponential_decay_fit(rows: &[PairCorrelation]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.rho.filter(|&p| p > 0.0).map(|p| (r.distance_km, p.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, -slope))
}

/// Indices of stations sorted by distance from `i` (excluding `i`).
pub fn nearest_stations(ds: &Dataset, i: usize) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = (0..ds.n_sites())
        .filter(|&j| j != i)
        .map(|j| (j, pair_distance(ds, i, j)))
        .collect();
    v.sort_by(|a, b| total_cmp(&a.1, &b.1));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::model::{validate_dataset, StationRecord, WindSeries};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn completeness() {
        let mut v = vec![Some(1.0); 100];
        for x in v.iter_mut().take(5) {
            *x = None;
        }
        let c = missing_data_filter(&v, 0.9);
        assert!(c.passed);
        assert_relative_eq!(c.frac_present, 0.95);
        for x in v.iter_mut().take(11) {
            *x = None;
        }
        assert!(!missing_data_filter(&v, 0.9).passed);
        assert!(!missing_data_filter(&[None, None], 0.9).passed);
        assert_eq!(missing_data_filter(&[], 0.9).frac_present, 0.0);
    }

    #[test]
    fn ranks() {
        let r = rank_transform(&some(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(r, vec![Some(1.0), Some(1.0 / 3.0), Some(2.0 / 3.0)]);
        let r = rank_transform(&some(&[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(r, vec![Some(0.5), Some(0.5), Some(1.0)]);
        let r = rank_transform(&[Some(2.0), None, Some(1.0)]).unwrap();
        assert_eq!(r, vec![Some(1.0), None, Some(0.5)]);
        assert_eq!(rank_transform(&some(&[4.0, 4.0])), Err(Error::DegenerateRanks));
    }

    #[test]
    fn spearman_examples() {
        let a: Vec<f64> = (1..=20).map(|i| i as f64 * 0.37).collect();
        let sq: Vec<f64> = a.iter().map(|x| x * x).collect();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_relative_eq!(spearman(&some(&a), &some(&sq)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(spearman(&some(&a), &some(&neg)).unwrap(), -1.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(spearman(&some(&x), &some(&y)).unwrap().abs() < 0.05);
        assert!(matches!(
            spearman(&[Some(1.0), Some(2.0), None], &[Some(1.0), Some(2.0), Some(3.0)]),
            Err(Error::InsufficientOverlap { .. })
        ));
    }

    #[test]
    fn too_few_stations() {
        let st: Vec<StationRecord> = (0..4)
            .map(|i| StationRecord::new(format!("s{i}"), 53.0 + i as f64 * 0.1, -8.0, StationClass::A))
            .collect();
        let ds = validate_dataset(st, vec![]).unwrap();
        assert!(matches!(
            neighbour_filter(&ds, &QcConfig::default()),
            Err(Error::InsufficientNeighbours { .. })
        ));
    }

    #[test]
    fn two_station_table() {
        let st = vec![
            StationRecord::new("a", 53.0, -8.0, StationClass::Met),
            StationRecord::new("b", 53.0, -8.0, StationClass::A),
        ];
        let v: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        let ds = validate_dataset(
            st,
            vec![WindSeries::new("a", 0, v.clone()), WindSeries::new("b", 0, v)],
        )
        .unwrap();
        let rows = correlation_vs_distance(&ds, |_, _| true, CorrelationMode::Levels);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].distance_km, 0.0);
        assert_relative_eq!(rows[0].rho.unwrap(), 1.0, epsilon = 1e-12);
    }
}
