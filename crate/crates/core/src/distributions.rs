//! Candidate wind-speed distributions, maximum-likelihood fits and
//! goodness-of-fit measures.
//!
//! Parameterisations: Weibull `(k, λ)`, Gamma `(α, β)` with rate β, and
//! log-normal `(μ, σ)` of `ln W`.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WeibullParams;
use crate::special::{digamma, gamma, ln_gamma, norm_cdf, norm_ppf, reg_lower_gamma, trigamma};
use crate::stats::{mean, quantile_type7, sorted};

pub const MIN_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistFamily {
    Weibull,
    Gamma,
    LogNormal,
}

impl DistFamily {
    /// Also the tie-break order of the log-likelihood tally.
    pub const ALL: [DistFamily; 3] = [DistFamily::Weibull, DistFamily::Gamma, DistFamily::LogNormal];

    pub fn as_str(self) -> &'static str {
        match self {
            DistFamily::Weibull => "weibull",
            DistFamily::Gamma => "gamma",
            DistFamily::LogNormal => "lognormal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistFit {
    pub family: DistFamily,
    pub params: [f64; 2],
    pub loglik: f64,
    pub ks_stat: f64,
    pub p95_abs_diff: f64,
}

pub fn weibull_cdf(w: f64, p: &WeibullParams) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    -(-(w / p.scale).powf(p.shape)).exp_m1()
}

pub fn weibull_quantile(prob: f64, p: &WeibullParams) -> Result<f64> {
    if !(0.0..1.0).contains(&prob) {
        if prob >= 1.0 {
            return Err(Error::PercentileAtUpperBound(prob));
        }
        return Err(Error::InvalidParameter {
            name: "probability",
            value: prob,
        });
    }
    Ok(p.scale * (-(-prob).ln_1p()).powf(1.0 / p.shape))
}

pub fn weibull_mean(p: &WeibullParams) -> f64 {
    p.scale * gamma(1.0 + 1.0 / p.shape)
}

pub fn weibull_variance(p: &WeibullParams) -> f64 {
    let g1 = gamma(1.0 + 1.0 / p.shape);
    p.scale * p.scale * (gamma(1.0 + 2.0 / p.shape) - g1 * g1)
}

/// Mean of √W for W ~ Weibull(k, λ); √W is Weibull(2k, √λ).
pub fn sqrt_weibull_mean(p: &WeibullParams) -> f64 {
    p.scale.sqrt() * gamma(1.0 + 0.5 / p.shape)
}

pub fn cdf(family: DistFamily, params: [f64; 2], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match family {
        DistFamily::Weibull => weibull_cdf(
            x,
            &WeibullParams {
                shape: params[0],
                scale: params[1],
            },
        ),
        DistFamily::Gamma => reg_lower_gamma(params[0], params[1] * x),
        DistFamily::LogNormal => norm_cdf((x.ln() - params[0]) / params[1]),
    }
}

pub fn quantile(family: DistFamily, params: [f64; 2], p: f64) -> f64 {
    match family {
        DistFamily::Weibull => params[1] * (-(-p).ln_1p()).powf(1.0 / params[0]),
        DistFamily::LogNormal => (params[0] + params[1] * norm_ppf(p)).exp(),
        DistFamily::Gamma => {
            let (a, b) = (params[0], params[1]);
            let mut hi = (a + 10.0 * a.sqrt() + 10.0) / b;
            while reg_lower_gamma(a, b * hi) < p {
                hi *= 2.0;
            }
            crate::optim::bisect(|x| reg_lower_gamma(a, b * x) - p, 0.0, hi, hi * 1e-15)
                .unwrap_or(f64::NAN)
        }
    }
}

pub fn log_likelihood(family: DistFamily, params: [f64; 2], sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let sum_ln: f64 = sample.iter().map(|x| x.ln()).sum();
    match family {
        DistFamily::Weibull => {
            let (k, l) = (params[0], params[1]);
            let s: f64 = sample.iter().map(|x| (x / l).powf(k)).sum();
            n * (k.ln() - k * l.ln()) + (k - 1.0) * sum_ln - s
        }
        DistFamily::Gamma => {
            let (a, b) = (params[0], params[1]);
            let s: f64 = sample.iter().sum();
            n * (a * b.ln() - ln_gamma(a)) + (a - 1.0) * sum_ln - b * s
        }
        DistFamily::LogNormal => {
            let (mu, sd) = (params[0], params[1]);
            let ss: f64 = sample.iter().map(|x| (x.ln() - mu).powi(2)).sum();
            -sum_ln - n * (sd.ln() + 0.5 * (2.0 * core::f64::consts::PI).ln()) - ss / (2.0 * sd * sd)
        }
    }
}

/// Zeros replaced by half the smallest positive value; checks size and
/// degeneracy.
pub fn prepare_sample(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::TooFewObservations {
            needed: MIN_SAMPLE,
            got: sample.len(),
        });
    }
    if let Some(&bad) = sample.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidParameter {
            name: "sample value",
            value: bad,
        });
    }
    let first = sample[0];
    if sample.iter().all(|&x| x == first) {
        return Err(Error::DegenerateSample);
    }
    let floor = sample.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    Ok(sample.iter().map(|&x| if x > 0.0 { x } else { 0.5 * floor }).collect())
}

/// Method-of-moments parameters (the optimiser's starting point).
pub fn method_of_moments(family: DistFamily, sample: &[f64]) -> [f64; 2] {
    let m = mean(sample);
    let n = sample.len() as f64;
    let var = sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    match family {
        DistFamily::Weibull => {
            let k = (var.sqrt() / m).powf(-1.086).clamp(0.05, 50.0);
            [k, m / gamma(1.0 + 1.0 / k)]
        }
        DistFamily::Gamma => [m * m / var, m / var],
        DistFamily::LogNormal => {
            let s2 = (1.0 + var / (m * m)).ln();
            [m.ln() - 0.5 * s2, s2.sqrt()]
        }
    }
}

fn weibull_mle(x: &[f64]) -> [f64; 2] {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mean_lx = lx.iter().sum::<f64>() / n;
    // scale by the max to keep x^k in range
    let xmax = x.iter().copied().fold(0.0, f64::max);
    let lmax = xmax.ln();
    // profile score g(k) = S1/S0 − 1/k − mean(ln x), increasing in k
    let g_and_dg = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &lx {
            let w = (k * (l - lmax)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let r = s1 / s0;
        (r - 1.0 / k - mean_lx, s2 / s0 - r * r + 1.0 / (k * k))
    };
    let mut k = method_of_moments(DistFamily::Weibull, x)[0];
    let (mut lo, mut hi) = (1e-3f64, 1e3f64);
    for _ in 0..200 {
        let (g, dg) = g_and_dg(k);
        if g > 0.0 {
            hi = hi.min(k);
        } else {
            lo = lo.max(k);
        }
        let mut next = k - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-15 * k {
            k = next;
            break;
        }
        k = next;
    }
    let s0: f64 = lx.iter().map(|&l| (k * (l - lmax)).exp()).sum();
    let scale = xmax * (s0 / n).powf(1.0 / k);
    [k, scale]
}

fn gamma_mle(x: &[f64]) -> [f64; 2] {
    let n = x.len() as f64;
    let m = mean(x);
    let s = m.ln() - x.iter().map(|v| v.ln()).sum::<f64>() / n;
    let mut a = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = a.ln() - digamma(a) - s;
        let df = 1.0 / a - trigamma(a);
        let next = a - f / df;
        let next = if next > 0.0 { next } else { 0.5 * a };
        if (next - a).abs() <= 1e-15 * a {
            a = next;
            break;
        }
        a = next;
    }
    [a, a / m]
}

fn lognormal_mle(x: &[f64]) -> [f64; 2] {
    let n = x.len() as f64;
    let mu = x.iter().map(|v| v.ln()).sum::<f64>() / n;
    let var = x.iter().map(|v| (v.ln() - mu).powi(2)).sum::<f64>() / n;
    [mu, var.sqrt()]
}

/// Two-sided Kolmogorov–Smirnov distance between the sample's ECDF and
/// the fitted CDF.
pub fn ks_statistic(sample: &[f64], fitted: &DistFit) -> f64 {
    ks_against(sample, |x| cdf(fitted.family, fitted.params, x))
}

pub fn ks_against<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d.clamp(0.0, 1.0)
}

pub fn fit_mle(family: DistFamily, sample: &[f64]) -> Result<DistFit> {
    let x = prepare_sample(sample)?;
    let params = match family {
        DistFamily::Weibull => weibull_mle(&x),
        DistFamily::Gamma => gamma_mle(&x),
        DistFamily::LogNormal => lognormal_mle(&x),
    };
    let loglik = log_likelihood(family, params, &x);
    let mut fit = DistFit {
        family,
        params,
        loglik,
        ks_stat: 0.0,
        p95_abs_diff: 0.0,
    };
    fit.ks_stat = ks_statistic(sample, &fit);
    let emp = quantile_type7(&sorted(sample), 0.95);
    fit.p95_abs_diff = (emp - quantile(family, params, 0.95)).abs();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilySummary {
    pub loglik_wins: usize,
    pub mean_ks: f64,
    pub mean_p95_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSummary {
    /// Indexed like [`DistFamily::ALL`].
    pub families: [FamilySummary; 3],
    pub fits: Vec<(String, [DistFit; 3])>,
    pub failures: Vec<(String, Error)>,
}

impl SelectionSummary {
    pub fn get(&self, family: DistFamily) -> &FamilySummary {
        &self.families[family as usize]
    }
}

/// Fit every family per station, tally log-likelihood winners (ties go to
/// the earlier family in [`DistFamily::ALL`]) and average KS and p95 error.
pub fn select_distribution<S: AsRef<str>, V: AsRef<[f64]>>(samples: &[(S, V)]) -> SelectionSummary {
    let mut fams = [FamilySummary::default(); 3];
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    'station: for (id, sample) in samples {
        let mut row = [None; 3];
        for (j, &fam) in DistFamily::ALL.iter().enumerate() {
            match fit_mle(fam, sample.as_ref()) {
                Ok(f) => row[j] = Some(f),
                Err(e) => {
                    failures.push((String::from(id.as_ref()), e));
                    continue 'station;
                }
            }
        }
        let row = row.map(|f| f.expect("all fits present"));
        let mut best = 0;
        for j in 1..3 {
            if row[j].loglik > row[best].loglik {
                best = j;
            }
        }
        fams[best].loglik_wins += 1;
        for j in 0..3 {
            fams[j].mean_ks += row[j].ks_stat;
            fams[j].mean_p95_abs_diff += row[j].p95_abs_diff;
        }
        fits.push((String::from(id.as_ref()), row));
    }
    let n = fits.len().max(1) as f64;
    for f in &mut fams {
        f.mean_ks /= n;
        f.mean_p95_abs_diff /= n;
    }
    if fits.is_empty() {
        for f in &mut fams {
            f.mean_ks = f64::NAN;
            f.mean_p95_abs_diff = f64::NAN;
        }
    }
    SelectionSummary {
        families: fams,
        fits,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Weibull};

    fn wb(k: f64, l: f64) -> WeibullParams {
        WeibullParams::new(k, l).unwrap()
    }

    fn draws(k: f64, l: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Weibull::new(l, k).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn weibull_closed_forms() {
        let p = wb(2.0, 6.0);
        assert_relative_eq!(weibull_cdf(6.0, &p), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(weibull_cdf(0.0, &p), 0.0);
        assert_relative_eq!(weibull_quantile(0.9, &p).unwrap(), 9.104_562_776_310_878, epsilon = 1e-12);
        assert!((weibull_cdf(9.1046, &p) - 0.9).abs() < 1e-4);
        assert_eq!(weibull_quantile(0.0, &p).unwrap(), 0.0);
        assert!(matches!(weibull_quantile(1.0, &p), Err(Error::PercentileAtUpperBound(_))));
        assert_relative_eq!(weibull_mean(&wb(1.0, 3.0)), 3.0, epsilon = 1e-13);
        assert_relative_eq!(weibull_mean(&p), 5.317_361_552_716_548, epsilon = 1e-12);
        assert_relative_eq!(sqrt_weibull_mean(&wb(0.5, 4.0)), 2.0, epsilon = 1e-13);
        assert_relative_eq!(sqrt_weibull_mean(&p), 2.220_223_570_380_656, epsilon = 1e-12);
    }

    #[test]
    fn weibull_mle_recovers_parameters() {
        let x = draws(2.0, 6.0, 100_000, 7);
        let f = fit_mle(DistFamily::Weibull, &x).unwrap();
        assert!((f.params[0] - 2.0).abs() < 0.05 && (f.params[1] - 6.0).abs() < 0.1, "{:?}", f.params);
        // score equations vanish at the optimum
        let h = 1e-6;
        for i in 0..2 {
            let mut up = f.params;
            let mut dn = f.params;
            up[i] += h;
            dn[i] -= h;
            let g = (log_likelihood(DistFamily::Weibull, up, &x) - log_likelihood(DistFamily::Weibull, dn, &x))
                / (2.0 * h);
            assert!(g.abs() / x.len() as f64 <= 1e-6, "gradient {g}");
        }
    }

    #[test]
    fn gamma_on_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Exp::new(0.4).unwrap();
        let x: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let f = fit_mle(DistFamily::Gamma, &x).unwrap();
        assert!((f.params[0] - 1.0).abs() < 0.05, "{:?}", f.params);
    }

    #[test]
    fn too_few_and_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        for fam in DistFamily::ALL {
            assert!(matches!(fit_mle(fam, &x), Err(Error::TooFewObservations { .. })));
        }
        assert!(matches!(fit_mle(DistFamily::Weibull, &[2.0; 12]), Err(Error::DegenerateSample)));
    }

    #[test]
    fn ks_examples() {
        let p = wb(2.0, 1.0);
        let fit = DistFit {
            family: DistFamily::Weibull,
            params: [2.0, 1.0],
            loglik: 0.0,
            ks_stat: 0.0,
            p95_abs_diff: 0.0,
        };
        let n = 10;
        let x: Vec<f64> = (1..=n)
            .map(|i| weibull_quantile((i as f64 - 0.5) / n as f64, &p).unwrap())
            .collect();
        assert!(ks_statistic(&x, &fit) <= 0.5 / n as f64 + 1e-12);
        let far = vec![100.0; 10];
        assert!(ks_statistic(&far, &fit) > 1.0 - 1e-12);
        let median = weibull_quantile(0.5, &p).unwrap();
        assert_relative_eq!(ks_statistic(&[median], &fit), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quantiles_invert_cdfs() {
        for (fam, params) in [
            (DistFamily::Weibull, [1.7, 5.0]),
            (DistFamily::Gamma, [2.3, 0.6]),
            (DistFamily::LogNormal, [1.2, 0.4]),
        ] {
            for &p in &[0.01, 0.3, 0.95] {
                assert_relative_eq!(cdf(fam, params, quantile(fam, params, p)), p, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn zeros_replaced_for_fitting_only() {
        let mut x = draws(1.8, 4.0, 200, 3);
        x[0] = 0.0;
        x[5] = 0.0;
        for fam in DistFamily::ALL {
            let f = fit_mle(fam, &x).unwrap();
            assert!(f.loglik.is_finite());
        }
    }

    #[test]
    fn single_station_tally() {
        let x = draws(2.0, 6.0, 500, 5);
        let s = select_distribution(&[("s1", x)]);
        let total: usize = s.families.iter().map(|f| f.loglik_wins).sum();
        assert_eq!(total, 1);
    }
}
