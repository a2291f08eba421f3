//! RMSE, Gaussian and discretised CRPS, and upper-tail metrics.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf};
use crate::stats::{pearson, quantile_type7, sorted};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Closed-form CRPS of N(μ, σ²) at `y`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
        });
    }
    let z = (y - mu) / sigma;
    Ok(sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - FRAC_1_SQRT_PI))
}

/// Σ_j (F(y_j) − 1{y_j ≥ y})² Δ over the midpoints of `m` equal intervals
/// of `[lo, hi]`.
pub fn crps_discretized<F: Fn(f64) -> f64>(cdf: F, y: f64, lo: f64, hi: f64, m: usize) -> Result<f64> {
    if !(lo < y && y < hi) {
        return Err(Error::OutsideGrid { y, lo, hi });
    }
    if m < 100 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
        });
    }
    let dy = (hi - lo) / m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let x = lo + (j as f64 + 0.5) * dy;
        let step = if x >= y { 1.0 } else { 0.0 };
        let d = cdf(x) - step;
        acc += d * d;
    }
    Ok(acc * dy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeMetric {
    /// Upper-tail percentage q (the top q% of truth values).
    pub percentile: f64,
    pub n: usize,
    pub rmse: f64,
    /// mean(pred − truth)
    pub bias: f64,
    pub pearson_r: Option<f64>,
}

/// Metrics on the pairs whose truth exceeds the (100 − q)th percentile of
/// truth, for each q. Subsets with fewer than 3 pairs are skipped.
pub fn extreme_metrics(pred: &[f64], truth: &[f64], percentiles: &[f64]) -> Result<Vec<ExtremeMetric>> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.len() < 100 {
        return Err(Error::TooFewObservations {
            needed: 100,
            got: pred.len(),
        });
    }
    let st = sorted(truth);
    let mut out = Vec::new();
    for &q in percentiles {
        let thr = quantile_type7(&st, 1.0 - q / 100.0);
        let (p, t): (Vec<f64>, Vec<f64>) = pred
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t > thr)
            .map(|(&p, &t)| (p, t))
            .unzip();
        if p.len() < 3 {
            log::warn!("top {q}% subset has {} pairs; skipped", p.len());
            continue;
        }
        out.push(ExtremeMetric {
            percentile: q,
            n: p.len(),
            rmse: rmse(&p, &t)?,
            bias: p.iter().zip(&t).map(|(a, b)| a - b).sum::<f64>() / p.len() as f64,
            pearson_r: pearson(&p, &t),
        });
    }
    Ok(out)
}
