//! Penalised-complexity priors, each calibrated by a tail probability.

use serde::{Deserialize, Serialize};

use crate::optim::bisect;

/// PC prior for a 2-D Matérn range: 1/φ ~ Exp(λ), so P(φ < φ₀) = exp(−λ/φ₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcRange {
    pub lambda: f64,
}

impl PcRange {
    /// Calibrate from P(φ < `phi0`) = `alpha`.
    pub fn from_tail(phi0: f64, alpha: f64) -> Self {
        PcRange {
            lambda: -phi0 * alpha.ln(),
        }
    }

    pub fn log_density(&self, phi: f64) -> f64 {
        self.lambda.ln() - 2.0 * phi.ln() - self.lambda / phi
    }

    pub fn prob_below(&self, phi: f64) -> f64 {
        (-self.lambda / phi).exp()
    }

    pub fn median(&self) -> f64 {
        self.lambda / core::f64::consts::LN_2
    }
}

/// PC prior for a standard deviation: σ ~ Exp(λ), P(σ > u) = exp(−λu).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcSd {
    pub lambda: f64,
}

impl PcSd {
    /// Calibrate from P(σ > `u`) = `alpha`.
    pub fn from_tail(u: f64, alpha: f64) -> Self {
        PcSd {
            lambda: -alpha.ln() / u,
        }
    }

    pub fn log_density(&self, sigma: f64) -> f64 {
        self.lambda.ln() - self.lambda * sigma
    }

    pub fn prob_above(&self, sigma: f64) -> f64 {
        (-self.lambda * sigma).exp()
    }

    pub fn median(&self) -> f64 {
        core::f64::consts::LN_2 / self.lambda
    }
}

/// PC prior for a correlation with base model ρ = 1 (distance √(1−ρ)):
/// π(ρ) = θ e^{−θ√(1−ρ)} / (1 − e^{−√2 θ}) · 1 / (2√(1−ρ)) on (−1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcCor1 {
    pub theta: f64,
}

impl PcCor1 {
    fn upper_tail(theta: f64, u: f64) -> f64 {
        (-(-theta * (1.0 - u).sqrt()).exp_m1()) / (-(-core::f64::consts::SQRT_2 * theta).exp_m1())
    }

    /// Calibrate from P(ρ > `u`) = `alpha` (requires alpha > (1 − u)^½ / √2).
    pub fn from_tail(u: f64, alpha: f64) -> Self {
        let theta = bisect(|t| Self::upper_tail(t, u) - alpha, 1e-8, 1e3, 1e-15).unwrap_or(f64::NAN);
        PcCor1 { theta }
    }

    pub fn log_density(&self, rho: f64) -> f64 {
        let s = (1.0 - rho).sqrt();
        let norm = -(-core::f64::consts::SQRT_2 * self.theta).exp_m1();
        self.theta.ln() - self.theta * s - norm.ln() - (2.0 * s).ln()
    }

    pub fn prob_above(&self, rho: f64) -> f64 {
        Self::upper_tail(self.theta, rho)
    }

    pub fn median(&self) -> f64 {
        bisect(|r| self.prob_above(r) - 0.5, -1.0 + 1e-12, 1.0 - 1e-12, 1e-14).unwrap_or(0.0)
    }
}

/// Prior set for the GP hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub range: PcRange,
    pub sigma_z: PcSd,
    pub sigma_eps: PcSd,
    pub rho: PcCor1,
    pub sigma_d: PcSd,
}

impl Default for Priors {
    /// P(φ < 200 km) = 0.3, P(σ_z > 0.75) = 0.5, P(σ_ε > 0.75) = 0.1,
    /// P(ρ > 0.8) = 0.7 and, for the diurnal random walk, P(σ_d > 1) = 0.01.
    fn default() -> Self {
        Priors {
            range: PcRange::from_tail(200.0, 0.3),
            sigma_z: PcSd::from_tail(0.75, 0.5),
            sigma_eps: PcSd::from_tail(0.75, 0.1),
            rho: PcCor1::from_tail(0.8, 0.7),
            sigma_d: PcSd::from_tail(1.0, 0.01),
        }
    }
}
