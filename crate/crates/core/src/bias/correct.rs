//! Quantile mapping of raw series onto calibrated Weibull distributions and
//! checks of the calibrated distributions against station data.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::distributions::{weibull_mean, weibull_quantile, weibull_variance};
use crate::error::{Error, Result};
use crate::model::{WeibullParams, WindSeries};
use crate::stats::{average_ranks, mean, pearson, quantile_type7, sorted, variance};

/// Hazen plotting positions (rank − 0.5)/n of the present values, ties
/// averaged; missing entries stay missing.
pub fn empirical_percentiles(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 10 {
        return Err(Error::TooFewObservations {
            needed: 10,
            got: present.len(),
        });
    }
    if present.iter().all(|&v| v == present[0]) {
        return Err(Error::DegenerateSample);
    }
    let n = present.len() as f64;
    let mut ranks = average_ranks(&present).into_iter();
    Ok(values
        .iter()
        .map(|v| v.map(|_| (ranks.next().expect("one rank per present value") - 0.5) / n))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedSeries {
    pub station_id: String,
    pub percentiles: Vec<Option<f64>>,
    pub values: Vec<Option<f64>>,
    pub params: WeibullParams,
}

/// W̃ = F⁻¹(p) under `params` for every present value.
pub fn correct_series(series: &WindSeries, params: &WeibullParams) -> Result<CorrectedSeries> {
    let params = WeibullParams::new(params.shape, params.scale)?;
    let percentiles = empirical_percentiles(&series.values)?;
    let values = percentiles
        .iter()
        .map(|p| p.map(|p| weibull_quantile(p, &params)).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrectedSeries {
        station_id: series.station_id.clone(),
        percentiles,
        values,
        params,
    })
}

/// Empirical versus Weibull-implied moments at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMoments {
    pub station_id: String,
    pub empirical: [f64; 3],
    pub implied: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// "mean", "variance" or "p95".
    pub metric: String,
    pub mae: f64,
    /// Absent with fewer than three stations or zero spread.
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub stations: Vec<StationMoments>,
    pub metrics: Vec<MetricSummary>,
}

/// Compare each station's sample mean, variance and 95th percentile with
/// the values implied by its calibrated parameters.
pub fn validate_calibrated_distributions(stations: &[(String, Vec<f64>, WeibullParams)]) -> Result<ValidationTable> {
    if stations.is_empty() {
        return Err(Error::Empty);
    }
    let mut rows = Vec::with_capacity(stations.len());
    for (id, sample, p) in stations {
        if sample.len() < 2 {
            return Err(Error::TooFewObservations {
                needed: 2,
                got: sample.len(),
            });
        }
        rows.push(StationMoments {
            station_id: id.clone(),
            empirical: [mean(sample), variance(sample), quantile_type7(&sorted(sample), 0.95)],
            implied: [weibull_mean(p), weibull_variance(p), weibull_quantile(0.95, p)?],
        });
    }
    let metrics = ["mean", "variance", "p95"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let e: Vec<f64> = rows.iter().map(|r| r.empirical[k]).collect();
            let m: Vec<f64> = rows.iter().map(|r| r.implied[k]).collect();
            let mae = e.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() / e.len() as f64;
            MetricSummary {
                metric: String::from(*name),
                mae,
                pearson_r: if e.len() >= 3 { pearson(&e, &m) } else { None },
            }
        })
        .collect();
    Ok(ValidationTable { stations: rows, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{ks_against, weibull_cdf};
    use crate::qc::spearman;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Weibull};

    #[test]
    fn hazen_positions() {
        let v = vec![Some(3.0), None, Some(1.0), Some(4.0), Some(2.0), Some(5.0), Some(6.0), Some(7.0), Some(8.0), Some(9.0), Some(10.0)];
        let p = empirical_percentiles(&v).unwrap();
        assert_eq!(p[1], None);
        assert_relative_eq!(p[2].unwrap(), 0.05);
        assert_relative_eq!(p[10].unwrap(), 0.95);
        let logged: Vec<Option<f64>> = v.iter().map(|x| x.map(|y| y.ln())).collect();
        assert_eq!(empirical_percentiles(&logged).unwrap(), p);
        assert!(matches!(empirical_percentiles(&[Some(1.0); 12]), Err(Error::DegenerateSample)));
        assert!(empirical_percentiles(&[Some(1.0), Some(2.0)]).is_err());
    }

    #[test]
    fn correction_removes_offset_and_keeps_ranks() {
        let target = WeibullParams { shape: 2.0, scale: 6.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Weibull::new(6.0, 2.0).unwrap();
        let raw: Vec<Option<f64>> = (0..10_000).map(|_| Some(w.sample(&mut rng) + 1.5)).collect();
        let s = WindSeries::new("x", 0, raw.clone());
        let c = correct_series(&s, &target).unwrap();
        let vals: Vec<f64> = c.values.iter().flatten().copied().collect();
        assert!(ks_against(&vals, |x| weibull_cdf(x, &target)) < 0.02);
        assert_relative_eq!(spearman(&c.values, &raw).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_identity_and_single_station() {
        let p = WeibullParams { shape: 2.0, scale: 6.0 };
        let table = validate_calibrated_distributions(&[(String::from("a"), vec![1.0, 2.0, 3.0], p)]).unwrap();
        assert!(table.metrics[0].mae.is_finite());
        assert_eq!(table.metrics[0].pearson_r, None);
    }
}
