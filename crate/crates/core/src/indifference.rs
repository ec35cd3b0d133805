//! Exponential-utility certainty equivalents and utility-indifference prices.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numeric::weighted_log_sum_exp;

/// Risk aversion of an exponential-utility agent. `Infinite` means the agent
/// values a cash-flow by its essential infimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aversion {
    Finite(f64),
    Infinite,
}

impl Aversion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Aversion::Finite(a) if !(a >= 0.0 && a.is_finite()) => {
                Err(Error::Parameter(format!("risk aversion must be >= 0, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Aversion::Infinite)
    }
}

impl From<f64> for Aversion {
    fn from(a: f64) -> Self {
        if a == f64::INFINITY {
            Aversion::Infinite
        } else {
            Aversion::Finite(a)
        }
    }
}

impl fmt::Display for Aversion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aversion::Finite(a) => write!(f, "{a}"),
            Aversion::Infinite => f.write_str("inf"),
        }
    }
}

// Serialised as a number, or the string "inf".
impl Serialize for Aversion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Aversion::Finite(a) => s.serialize_f64(*a),
            Aversion::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Aversion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(a) => Ok(Aversion::from(a)),
            Repr::Int(a) => Ok(Aversion::Finite(a as f64)),
            Repr::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Inf" | "infinite") => {
                Ok(Aversion::Infinite)
            }
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Risk aversions of the liquidity supplier (`gamma`) and demander (`c`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPair {
    pub gamma: f64,
    pub c: Aversion,
}

impl AgentPair {
    pub fn new(gamma: f64, c: impl Into<Aversion>) -> Result<Self> {
        let pair = AgentPair { gamma, c: c.into() };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        match self.c {
            Aversion::Finite(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Parameter(format!("c must be > 0 or inf, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Harmonic aggregate `cγ/(c+γ)`.
    pub fn aggregate(&self) -> f64 {
        match self.c {
            Aversion::Infinite => self.gamma,
            Aversion::Finite(_) if self.gamma == 0.0 => 0.0,
            Aversion::Finite(c) => c * self.gamma / (c + self.gamma),
        }
    }

    /// Demander share `c/(c+γ)`; 1 when `c = ∞`.
    pub fn demander_share(&self) -> f64 {
        match self.c {
            Aversion::Infinite => 1.0,
            Aversion::Finite(c) => c / (c + self.gamma),
        }
    }

    /// Supplier share `γ/(c+γ)`; 0 when `c = ∞`.
    pub fn supplier_share(&self) -> f64 {
        match self.c {
            Aversion::Infinite => 0.0,
            Aversion::Finite(c) => self.gamma / (c + self.gamma),
        }
    }
}

/// Finite weighted sample standing in for a conditional law.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Parameter(format!(
                "sample set needs matching non-empty values/weights ({} vs {})",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("sample values must be finite".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Parameter("sample weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("sample weights sum to {total}, not 1")));
        }
        Ok(SampleSet { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        SampleSet::new(values, vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shifted(&self, shift: f64) -> Self {
        SampleSet {
            values: self.values.iter().map(|v| v + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampleSet::new(self.values.iter().map(|&v| f(v)).collect(), self.weights.clone())
    }
}

/// `-(1/a) log Σ wᵢ exp(-a vᵢ)`; the mean for `a = 0`, the infimum over the
/// support for `a = ∞`.
pub fn certainty_equivalent(samples: &SampleSet, aversion: Aversion) -> Result<f64> {
    aversion.validate()?;
    let value = match aversion {
        Aversion::Infinite => samples
            .values
            .iter()
            .zip(&samples.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, _)| v)
            .fold(f64::INFINITY, f64::min),
        Aversion::Finite(a) if a == 0.0 => {
            samples.values.iter().zip(&samples.weights).map(|(v, w)| v * w).sum()
        }
        Aversion::Finite(a) => {
            let exponents: Vec<f64> = samples.values.iter().map(|v| -a * v).collect();
            -weighted_log_sum_exp(&exponents, &samples.weights) / a
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(format!("aversion {aversion}")))
    }
}

/// `Π(F + shift) - Π(F) - shift`, which vanishes by cash invariance.
pub fn cash_invariance_check(samples: &SampleSet, aversion: Aversion, shift: f64) -> Result<f64> {
    let shifted = certainty_equivalent(&samples.shifted(shift), aversion)?;
    let base = certainty_equivalent(samples, aversion)?;
    Ok(shifted - base - shift)
}

/// Aggregated utility: the certainty equivalent at aversion `cγ/(c+γ)`.
pub fn aggregated_utility(samples: &SampleSet, agents: &AgentPair) -> Result<f64> {
    agents.validate()?;
    certainty_equivalent(samples, Aversion::Finite(agents.aggregate()))
}

/// Conditional supplier utility of `z X_1` given `X_t = x_t` for a Lévy driver.
pub fn levy_pi(model: &LevyModel, gamma: f64, z: f64, x_t: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if gamma == 0.0 {
        return Ok(z * x_t + (1.0 - t) * z * model.mean()?);
    }
    Ok(z * x_t + (1.0 - t) / gamma * model.kappa(gamma * z)?)
}

/// Supplier's indifference price for `y` units, inventory `z` and endowment
/// `G = aS`, given `X_t = x_t`. A domain error marks an illiquidity wall.
pub fn levy_price_curve(
    model: &LevyModel,
    gamma: f64,
    a: f64,
    z: f64,
    y: f64,
    x_t: f64,
    t: f64,
) -> Result<f64> {
    check_time(t)?;
    if gamma == 0.0 {
        return Ok(y * (x_t + (1.0 - t) * model.mean()?));
    }
    let held = model.kappa(gamma * (a + z))?;
    let after = model.kappa(gamma * (a + z - y))?;
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(y * x_t + (1.0 - t) / gamma * (held - after))
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("time {t} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pm_one() -> SampleSet {
        SampleSet::uniform(vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn certainty_equivalent_examples() {
        let flat = SampleSet::uniform(vec![1.0, 1.0, 1.0]).unwrap();
        assert!((certainty_equivalent(&flat, Aversion::Finite(5.0)).unwrap() - 1.0).abs() < 1e-15);
        let ce = certainty_equivalent(&pm_one(), Aversion::Finite(1.0)).unwrap();
        let brute = -(0.5 * (-1f64).exp() + 0.5 * 1f64.exp()).ln();
        assert!((ce - brute).abs() < 1e-15);
        assert!((ce + 1f64.cosh().ln()).abs() < 1e-15);
        assert!((ce + 0.433781).abs() < 1e-6);
        assert_eq!(certainty_equivalent(&pm_one(), Aversion::Infinite).unwrap(), -1.0);
        assert_eq!(certainty_equivalent(&pm_one(), Aversion::Finite(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn extreme_aversion_does_not_overflow() {
        let s = SampleSet::uniform(vec![-500.0, 300.0]).unwrap();
        let ce = certainty_equivalent(&s, Aversion::Finite(50.0)).unwrap();
        assert!((ce - (-500.0 + 2f64.ln() / 50.0)).abs() < 1e-9);
    }

    #[test]
    fn cash_invariance_examples() {
        assert_eq!(cash_invariance_check(&pm_one(), Aversion::Finite(1.0), 0.0).unwrap(), 0.0);
        assert!(cash_invariance_check(&pm_one(), Aversion::Finite(1.0), 3.0).unwrap().abs() < 1e-10);
        let s = SampleSet::new(vec![0.0, 2.0, 5.0], vec![0.2, 0.3, 0.5]).unwrap();
        // both sides by brute force
        let lhs = -(0.2 * (-2.0f64 * -1.0).exp() + 0.3 * (-2.0f64 * 1.0).exp() + 0.5 * (-2.0f64 * 4.0).exp()).ln() / 2.0;
        let rhs = -(0.2f64 + 0.3 * (-4.0f64).exp() + 0.5 * (-10.0f64).exp()).ln() / 2.0;
        assert!((lhs - rhs + 1.0).abs() < 1e-12);
        assert!(cash_invariance_check(&s, Aversion::Finite(2.0), -1.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn aggregated_utility_examples() {
        let k = SampleSet::uniform(vec![2.5; 4]).unwrap();
        let pair = AgentPair::new(1.0, 1.0).unwrap();
        assert!((aggregated_utility(&k, &pair).unwrap() - 2.5).abs() < 1e-15);
        let v = aggregated_utility(&pm_one(), &pair).unwrap();
        assert!((v + 2.0 * 0.5f64.cosh().ln()).abs() < 1e-15);
        assert!((v + 0.240229).abs() < 1e-6);
        let inf = AgentPair::new(1.0, Aversion::Infinite).unwrap();
        assert!((aggregated_utility(&pm_one(), &inf).unwrap() + 1f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn agent_pair_aggregate_limits() {
        assert_eq!(AgentPair::new(2.0, Aversion::Infinite).unwrap().aggregate(), 2.0);
        assert_eq!(AgentPair::new(0.0, 3.0).unwrap().aggregate(), 0.0);
        assert_eq!(AgentPair::new(1.0, 1.0).unwrap().aggregate(), 0.5);
        assert!(AgentPair::new(-1.0, 1.0).is_err());
        assert!(AgentPair::new(1.0, 0.0).is_err());
    }

    #[test]
    fn levy_pi_examples() {
        let bm = LevyModel::brownian(0.0, 1.0).unwrap();
        assert_eq!(levy_pi(&bm, 1.0, 0.0, 0.7, 0.2).unwrap(), 0.0);
        assert_eq!(levy_pi(&bm, 1.0, 1.0, 0.0, 0.0).unwrap(), -0.5);
        let g = LevyModel::gamma(2.0, 1.0).unwrap();
        let v = levy_pi(&g, 1.0, 1.0, 0.3, 0.5).unwrap();
        assert!((v - (0.3 + 0.5 * 1.5f64.ln())).abs() < 1e-15);
        assert!((v - 0.502733).abs() < 1e-6);
        assert!(matches!(levy_pi(&g, 1.0, -3.0, 0.0, 0.0), Err(Error::Domain { .. })));
        // risk-neutral branch
        let drift = LevyModel::brownian(0.4, 1.0).unwrap();
        assert!((levy_pi(&drift, 0.0, 2.0, 0.1, 0.5).unwrap() - (0.2 + 0.5 * 2.0 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn price_curve_examples() {
        let bm = LevyModel::brownian(0.0, 1.0).unwrap();
        assert_eq!(levy_price_curve(&bm, 1.0, 0.0, 0.0, 0.0, 0.3, 0.1).unwrap(), 0.0);
        let buy = levy_price_curve(&bm, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let sell = levy_price_curve(&bm, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0).unwrap();
        assert_eq!(buy, 0.5);
        assert_eq!(sell, 0.5);
        assert!(-sell <= buy);
        let g = LevyModel::gamma(1.0, 1.0).unwrap();
        assert!(matches!(
            levy_price_curve(&g, 1.0, 0.0, 0.0, 1.5, 0.0, 0.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn risk_neutral_limit_shrinks_linearly() {
        let bm = LevyModel::brownian(0.3, 1.0).unwrap();
        let (a, z, y, x, t) = (0.5, 0.2, 1.0, 0.4, 0.25);
        let target = y * (x + (1.0 - t) * 0.3);
        let e2 = (levy_price_curve(&bm, 1e-2, a, z, y, x, t).unwrap() - target).abs();
        let e4 = (levy_price_curve(&bm, 1e-4, a, z, y, x, t).unwrap() - target).abs();
        assert!(e4 < e2);
        let ratio = e2 / e4;
        assert!((ratio - 100.0).abs() < 1.0, "ratio {ratio}");
    }

    fn samples_strategy() -> impl Strategy<Value = SampleSet> {
        prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..8).prop_map(|pairs| {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let values = pairs.iter().map(|p| p.0).collect();
            let mut weights: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
            let drift: f64 = 1.0 - weights.iter().sum::<f64>();
            weights[0] += drift;
            SampleSet::new(values, weights).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cash_invariance_holds(s in samples_strategy(), a in 0.0f64..4.0, shift in -10.0f64..10.0) {
            prop_assert!(cash_invariance_check(&s, Aversion::Finite(a), shift).unwrap().abs() <= 1e-10);
            prop_assert!(cash_invariance_check(&s, Aversion::Infinite, shift).unwrap().abs() <= 1e-10);
        }

        #[test]
        fn nonincreasing_in_aversion(s in samples_strategy(), a in 0.0f64..3.0, da in 0.0f64..3.0) {
            let lo = certainty_equivalent(&s, Aversion::Finite(a)).unwrap();
            let hi = certainty_equivalent(&s, Aversion::Finite(a + da)).unwrap();
            let inf = certainty_equivalent(&s, Aversion::Infinite).unwrap();
            prop_assert!(hi <= lo + 1e-12);
            prop_assert!(inf <= hi + 1e-12);
        }

        #[test]
        fn concave_in_values(
            pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..6),
            lam in 0.0f64..=1.0,
            a in 0.1f64..3.0,
        ) {
            let n = pairs.len();
            let f1 = SampleSet::uniform(pairs.iter().map(|p| p.0).collect()).unwrap();
            let f2 = SampleSet::uniform(pairs.iter().map(|p| p.1).collect()).unwrap();
            let mix = SampleSet::uniform(
                (0..n).map(|i| lam * pairs[i].0 + (1.0 - lam) * pairs[i].1).collect(),
            ).unwrap();
            let av = Aversion::Finite(a);
            let lhs = certainty_equivalent(&mix, av).unwrap();
            let rhs = lam * certainty_equivalent(&f1, av).unwrap()
                + (1.0 - lam) * certainty_equivalent(&f2, av).unwrap();
            prop_assert!(lhs >= rhs - 1e-10);
        }

        #[test]
        fn price_curve_convex_and_bid_ask(
            z in -0.3f64..0.3, y in 0.01f64..0.5, gamma in 0.1f64..2.0, t in 0.0f64..1.0, x in -1.0f64..1.0,
        ) {
            let g = LevyModel::gamma(2.0, 1.5).unwrap();
            let a = 0.2;
            let p = |yy: f64| levy_price_curve(&g, gamma, a, z, yy, x, t).unwrap();
            prop_assert!(-p(-y) <= p(y) + 1e-12);
            let h = y / 4.0;
            for k in -3..=3 {
                let c = k as f64 * h;
                let second = p(c + h) - 2.0 * p(c) + p(c - h);
                prop_assert!(second >= -1e-10);
            }
        }
    }
}
