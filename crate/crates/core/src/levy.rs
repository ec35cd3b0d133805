//! Closed-form cumulants of the supported Lévy driver families.
//!
//! The cumulant is normalised so that `E[exp(-u X_t)] = exp(-t κ(u))`; it is
//! concave with `κ(0) = 0` and finite exactly on the domain `U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Driver family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyModel {
    /// `X_t = b t + σ W_t`.
    Brownian { b: f64, sigma: f64 },
    /// `X_1 ~ Gamma(shape = beta, rate = alpha)`.
    Gamma { alpha: f64, beta: f64 },
    /// One-sided stable subordinator with `κ(u) = r u^α`.
    OneSidedStable { r: f64, alpha_exp: f64 },
}

impl LevyModel {
    pub fn brownian(b: f64, sigma: f64) -> Result<Self> {
        let m = LevyModel::Brownian { b, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        let m = LevyModel::Gamma { alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn stable(r: f64, alpha_exp: f64) -> Result<Self> {
        let m = LevyModel::OneSidedStable { r, alpha_exp };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyModel::Brownian { b, sigma } => {
                if !b.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::Parameter(format!(
                        "brownian requires finite b and sigma >= 0 (b={b}, sigma={sigma})"
                    )));
                }
            }
            LevyModel::Gamma { alpha, beta } => {
                if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "gamma requires alpha > 0 and beta > 0 (alpha={alpha}, beta={beta})"
                    )));
                }
            }
            LevyModel::OneSidedStable { r, alpha_exp } => {
                if !(r > 0.0 && r.is_finite() && alpha_exp > 0.0 && alpha_exp < 1.0) {
                    return Err(Error::Parameter(format!(
                        "stable requires r > 0 and 0 < alpha < 1 (r={r}, alpha={alpha_exp})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable domain `U`.
    pub fn domain(&self) -> String {
        match *self {
            LevyModel::Brownian { .. } => "(-inf, inf)".to_string(),
            LevyModel::Gamma { alpha, .. } => format!("({}, inf)", -alpha),
            LevyModel::OneSidedStable { .. } => "[0, inf)".to_string(),
        }
    }

    pub fn domain_contains(&self, u: f64) -> bool {
        if u.is_nan() {
            return false;
        }
        match *self {
            LevyModel::Brownian { .. } => u.is_finite(),
            LevyModel::Gamma { alpha, .. } => u > -alpha && u.is_finite(),
            LevyModel::OneSidedStable { .. } => u >= 0.0 && u.is_finite(),
        }
    }

    /// True when `u` is an interior point of `U`.
    pub fn interior_contains(&self, u: f64) -> bool {
        match *self {
            LevyModel::OneSidedStable { .. } => u > 0.0 && u.is_finite(),
            _ => self.domain_contains(u),
        }
    }

    fn check(&self, u: f64) -> Result<()> {
        if self.domain_contains(u) {
            Ok(())
        } else {
            Err(Error::Domain { value: u, domain: self.domain() })
        }
    }

    fn check_smooth(&self, u: f64) -> Result<()> {
        self.check(u)?;
        if !self.interior_contains(u) {
            return Err(Error::NonDifferentiable { value: u });
        }
        Ok(())
    }

    pub fn kappa(&self, u: f64) -> Result<f64> {
        self.check(u)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            LevyModel::Brownian { b, sigma } => b * u - 0.5 * sigma * sigma * u * u,
            LevyModel::Gamma { alpha, beta } => beta * (u / alpha).ln_1p(),
            LevyModel::OneSidedStable { r, alpha_exp } => r * u.powf(alpha_exp),
        })
    }

    pub fn kappa_prime(&self, u: f64) -> Result<f64> {
        self.check_smooth(u)?;
        Ok(match *self {
            LevyModel::Brownian { b, sigma } => b - sigma * sigma * u,
            LevyModel::Gamma { alpha, beta } => beta / (alpha + u),
            LevyModel::OneSidedStable { r, alpha_exp } => r * alpha_exp * u.powf(alpha_exp - 1.0),
        })
    }

    pub fn kappa_double_prime(&self, u: f64) -> Result<f64> {
        self.check_smooth(u)?;
        Ok(match *self {
            LevyModel::Brownian { sigma, .. } => -sigma * sigma,
            LevyModel::Gamma { alpha, beta } => -beta / ((alpha + u) * (alpha + u)),
            LevyModel::OneSidedStable { r, alpha_exp } => {
                r * alpha_exp * (alpha_exp - 1.0) * u.powf(alpha_exp - 2.0)
            }
        })
    }

    pub fn kappa_triple_prime(&self, u: f64) -> Result<f64> {
        self.check_smooth(u)?;
        Ok(match *self {
            LevyModel::Brownian { .. } => 0.0,
            LevyModel::Gamma { alpha, beta } => 2.0 * beta / (alpha + u).powi(3),
            LevyModel::OneSidedStable { r, alpha_exp } => {
                r * alpha_exp * (alpha_exp - 1.0) * (alpha_exp - 2.0) * u.powf(alpha_exp - 3.0)
            }
        })
    }

    /// `E[X_1] = κ'(0)`; undefined for the stable family.
    pub fn mean(&self) -> Result<f64> {
        self.kappa_prime(0.0)
    }
}
