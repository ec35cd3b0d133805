use serde::{Deserialize, Serialize};

/// Terminal payoff as a function of the factor value `W_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    /// `c0 + c1 w + c2 w²`.
    Polynomial { c0: f64, c1: f64, c2: f64 },
    /// `scale · exp(rate · w)`.
    Exponential { scale: f64, rate: f64 },
    /// `w - log cosh(a (w - center)) / a + offset`.
    LogCoshWave { a: f64, center: f64, offset: f64 },
    /// `Σ kᵢ fᵢ(w)`.
    Sum { terms: Vec<(f64, Payoff)> },
}

impl Payoff {
    pub fn zero() -> Self {
        Payoff::constant(0.0)
    }

    pub fn constant(c0: f64) -> Self {
        Payoff::Polynomial { c0, c1: 0.0, c2: 0.0 }
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Payoff::Polynomial { c0, c1, c2: 0.0 }
    }

    pub fn quadratic(c0: f64, c1: f64, c2: f64) -> Self {
        Payoff::Polynomial { c0, c1, c2 }
    }

    pub fn combine(terms: Vec<(f64, Payoff)>) -> Self {
        Payoff::Sum { terms }
    }

    pub fn value(&self, w: f64) -> f64 {
        match self {
            Payoff::Polynomial { c0, c1, c2 } => c0 + w * (c1 + c2 * w),
            Payoff::Exponential { scale, rate } => scale * (rate * w).exp(),
            Payoff::LogCoshWave { a, center, offset } => w - log_cosh(a * (w - center)) / a + offset,
            Payoff::Sum { terms } => terms.iter().map(|(k, f)| k * f.value(w)).sum(),
        }
    }

    pub fn derivative(&self, w: f64) -> f64 {
        match self {
            Payoff::Polynomial { c1, c2, .. } => c1 + 2.0 * c2 * w,
            Payoff::Exponential { scale, rate } => scale * rate * (rate * w).exp(),
            Payoff::LogCoshWave { a, center, .. } => 1.0 - (a * (w - center)).tanh(),
            Payoff::Sum { terms } => terms.iter().map(|(k, f)| k * f.derivative(w)).sum(),
        }
    }

    /// True when the payoff does not depend on `w`.
    pub fn is_constant(&self) -> bool {
        match self {
            Payoff::Polynomial { c1, c2, .. } => *c1 == 0.0 && *c2 == 0.0,
            Payoff::Exponential { scale, rate } => *scale == 0.0 || *rate == 0.0,
            Payoff::LogCoshWave { .. } => false,
            Payoff::Sum { terms } => terms.iter().all(|(k, f)| *k == 0.0 || f.is_constant()),
        }
    }
}

/// `log cosh x` without overflow.
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}
