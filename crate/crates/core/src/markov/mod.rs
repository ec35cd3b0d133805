//! Complete Brownian Markov market with terminal payoffs `s(W_1)`, `g(W_1)`,
//! `h(W_1)`.
//!
//! The value fields
//!
//! ```text
//! v(t,w)   = -(1/A) log E[exp(-A (g+h)(W_1)) | W_t = w],   A = cγ/(c+γ)
//! p(t,w,y) = -(1/γ) log E[exp(-γ (g - y s)(W_1)) | W_t = w]
//! ```
//!
//! solve KPZ equations; through the Cole–Hopf substitution they are plain
//! Gaussian expectations, evaluated here by Gauss–Hermite quadrature in log
//! space. Their spatial gradients `u = ∂v/∂w` and `q = ∂p/∂w` solve viscous
//! Burgers equations and are obtained by differentiating under the integral.

mod payoff;
pub mod quadratic;
pub mod quadrature;
pub mod shockwave;

pub use payoff::{log_cosh, Payoff};
pub use quadrature::GaussHermite;

use crate::error::{Error, Result};
use crate::indifference::{check_time, AgentPair};
use crate::numeric::{brent_root, log_sum_exp_logw};

/// Markov payoffs with the agents and the quadrature rule used to evaluate them.
#[derive(Debug, Clone)]
pub struct MarkovPayoffs {
    pub s: Payoff,
    pub g: Payoff,
    pub h: Payoff,
    pub agents: AgentPair,
    quad: GaussHermite,
    bracket: (f64, f64),
}

/// Weighted quadrature nodes of the conditional law of `W_1` given `W_t = w`.
struct Conditional<'a> {
    points: Vec<f64>,
    log_weights: &'a [f64],
}

impl MarkovPayoffs {
    pub fn new(s: Payoff, g: Payoff, h: Payoff, agents: AgentPair) -> Result<Self> {
        agents.validate()?;
        Ok(MarkovPayoffs { s, g, h, agents, quad: GaussHermite::default(), bracket: (-50.0, 50.0) })
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.quad = GaussHermite::new(order);
        self
    }

    /// Initial search bracket for the completeness inversion.
    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = (lo, hi);
        self
    }

    pub fn quadrature(&self) -> &GaussHermite {
        &self.quad
    }

    fn conditional(&self, t: f64, w: f64) -> Conditional<'_> {
        let scale = (1.0 - t).sqrt();
        Conditional {
            points: self.quad.nodes().iter().map(|x| w + scale * x).collect(),
            log_weights: self.quad.log_weights(),
        }
    }

    /// `-(1/a) log E[exp(-a F(W_1)) | W_t = w]`, with `a = 0` giving the mean.
    fn certainty_equivalent<F: Fn(f64) -> f64>(&self, aversion: f64, f: F, t: f64, w: f64) -> Result<f64> {
        check_time(t)?;
        if t == 1.0 {
            return Ok(f(w));
        }
        let cond = self.conditional(t, w);
        let vals: Vec<f64> = cond.points.iter().map(|&x| f(x)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { t, w });
        }
        if vals.iter().all(|v| *v == vals[0]) {
            return Ok(vals[0]);
        }
        let out = if aversion == 0.0 {
            vals.iter().zip(cond.log_weights).map(|(v, lw)| v * lw.exp()).sum()
        } else {
            let exps: Vec<f64> = vals.iter().map(|v| -aversion * v).collect();
            -log_sum_exp_logw(&exps, cond.log_weights) / aversion
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Quadrature { t, w })
        }
    }

    /// `E[D(W_1) exp(-a F(W_1))] / E[exp(-a F(W_1))]` given `W_t = w`, and
    /// the matching tilted variance.
    fn tilted_moments<F, D>(&self, aversion: f64, f: F, d: D, t: f64, w: f64) -> Result<(f64, f64)>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        check_time(t)?;
        if t == 1.0 {
            return Ok((d(w), 0.0));
        }
        let cond = self.conditional(t, w);
        let logs: Vec<f64> = cond
            .points
            .iter()
            .zip(cond.log_weights)
            .map(|(&x, lw)| lw - aversion * f(x))
            .collect();
        let ds: Vec<f64> = cond.points.iter().map(|&x| d(x)).collect();
        if logs.iter().chain(&ds).any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { t, w });
        }
        if ds.iter().all(|d| *d == ds[0]) {
            return Ok((ds[0], 0.0));
        }
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
        let total: f64 = probs.iter().sum();
        let mean = probs.iter().zip(&ds).map(|(p, d)| p * d).sum::<f64>() / total;
        let var = probs.iter().zip(&ds).map(|(p, d)| p * (d - mean) * (d - mean)).sum::<f64>() / total;
        Ok((mean, var))
    }

    fn aggregate_terminal(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.g.value(x) + self.h.value(x)
    }

    fn supplier_terminal(&self, y: f64) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.g.value(x) - y * self.s.value(x)
    }

    /// Aggregated value field `v(t, w)`.
    pub fn field_v(&self, t: f64, w: f64) -> Result<f64> {
        self.certainty_equivalent(self.agents.aggregate(), self.aggregate_terminal(), t, w)
    }

    /// Supplier value field `p(t, w, y)` for a position short `y` units.
    pub fn field_p(&self, t: f64, w: f64, y: f64) -> Result<f64> {
        self.certainty_equivalent(self.agents.gamma, self.supplier_terminal(y), t, w)
    }

    /// `u = ∂v/∂w`.
    pub fn field_u(&self, t: f64, w: f64) -> Result<f64> {
        let d = |x: f64| self.g.derivative(x) + self.h.derivative(x);
        Ok(self.tilted_moments(self.agents.aggregate(), self.aggregate_terminal(), d, t, w)?.0)
    }

    /// `q = ∂p/∂w`.
    pub fn field_q(&self, t: f64, w: f64, y: f64) -> Result<f64> {
        let d = |x: f64| self.g.derivative(x) - y * self.s.derivative(x);
        Ok(self.tilted_moments(self.agents.gamma, self.supplier_terminal(y), d, t, w)?.0)
    }

    /// Replication price `Π_0(G) - Π_0(G+H)` of the claim `-H` given `W_t = w`,
    /// evaluated with supplier aversion.
    pub fn replication_price(&self, t: f64, w: f64) -> Result<f64> {
        let gamma = self.agents.gamma;
        let pg = self.certainty_equivalent(gamma, |x| self.g.value(x), t, w)?;
        let pgh = self.certainty_equivalent(gamma, self.aggregate_terminal(), t, w)?;
        Ok(pg - pgh)
    }

    /// Solves `-q(t, w, y) = z` for `y`.
    pub fn completeness_invert(&self, t: f64, w: f64, z: f64) -> Result<f64> {
        let residual = |y: f64| -> Result<f64> { Ok(-self.field_q(t, w, y)? - z) };
        let (mut lo, mut hi) = self.bracket;
        let mut r_lo = residual(lo)?;
        let mut r_hi = residual(hi)?;
        let mut expansions = 0;
        while r_lo.signum() == r_hi.signum() && r_lo != 0.0 && r_hi != 0.0 {
            if expansions >= 12 {
                return Err(Error::NoRoot { target: z, lo, hi });
            }
            let width = hi - lo;
            lo -= width;
            hi += width;
            r_lo = residual(lo)?;
            r_hi = residual(hi)?;
            expansions += 1;
        }
        // the map must be strictly monotone on the bracket
        let probes: Vec<f64> = (0..=16)
            .map(|k| residual(lo + (hi - lo) * k as f64 / 16.0))
            .collect::<Result<_>>()?;
        let increasing = r_hi > r_lo;
        let monotone = probes
            .windows(2)
            .all(|p| if increasing { p[1] > p[0] } else { p[1] < p[0] });
        if !monotone {
            return Err(Error::Precondition(format!(
                "y -> -dp/dw is not strictly monotone on [{lo}, {hi}] at t={t}, w={w}"
            )));
        }
        let mut failed = None;
        let root = brent_root(
            |y| match residual(y) {
                Ok(r) => r,
                Err(e) => {
                    failed = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            1e-15,
            400,
        );
        if let Some(e) = failed {
            return Err(e);
        }
        let root = root.ok_or(Error::NoRoot { target: z, lo, hi })?;
        let r = residual(root)?;
        if r.abs() > 1e-10 * (1.0 + z.abs()) {
            return Err(Error::NoRoot { target: z, lo, hi });
        }
        Ok(root)
    }

    /// Optimal demander position `y†(t, w, -c/(c+γ) u(t, w))`.
    pub fn optimal_strategy(&self, t: f64, w: f64) -> Result<f64> {
        let target = -self.agents.demander_share() * self.field_u(t, w)?;
        self.completeness_invert(t, w, target)
    }

    /// EIPU `-∂p/∂y` at the optimal position.
    pub fn eipu(&self, t: f64, w: f64) -> Result<f64> {
        let y = self.optimal_strategy(t, w)?;
        self.eipu_at(t, w, y)
    }

    /// `-∂p/∂y(t, w, y)`: the tilted mean of `s(W_1)`.
    pub fn eipu_at(&self, t: f64, w: f64, y: f64) -> Result<f64> {
        let s = |x: f64| self.s.value(x);
        Ok(self.tilted_moments(self.agents.gamma, self.supplier_terminal(y), s, t, w)?.0)
    }

    /// `-∂²p/∂y²(t, w, y)`: γ times the tilted variance of `s(W_1)`.
    pub fn convexity_at(&self, t: f64, w: f64, y: f64) -> Result<f64> {
        let s = |x: f64| self.s.value(x);
        let (_, var) = self.tilted_moments(self.agents.gamma, self.supplier_terminal(y), s, t, w)?;
        Ok(self.agents.gamma * var)
    }

    /// Efficient price `p(t,w,Y*) - p(t,w,Y*+y)` for `y` units.
    pub fn efficient_price(&self, t: f64, w: f64, y: f64) -> Result<f64> {
        let ys = self.optimal_strategy(t, w)?;
        Ok(self.field_p(t, w, ys)? - self.field_p(t, w, ys + y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indifference::Aversion;

    fn pair(gamma: f64, c: f64) -> AgentPair {
        AgentPair::new(gamma, c).unwrap()
    }

    #[test]
    fn constant_terminal_is_flat() {
        let m = MarkovPayoffs::new(
            Payoff::linear(0.0, 1.0),
            Payoff::constant(1.5),
            Payoff::constant(0.5),
            pair(1.0, 2.0),
        )
        .unwrap();
        for (t, w) in [(0.0, 0.0), (0.4, -2.0), (0.99, 3.0), (1.0, 1.0)] {
            assert!((m.field_v(t, w).unwrap() - 2.0).abs() < 1e-13);
            assert!(m.field_u(t, w).unwrap().abs() < 1e-13);
        }
        assert_eq!(m.field_p(0.3, 0.2, 0.0).unwrap(), 1.5);
    }

    #[test]
    fn zero_supplier_payoff_gives_zero_p() {
        let m = MarkovPayoffs::new(Payoff::linear(0.0, 1.0), Payoff::zero(), Payoff::zero(), pair(1.0, 1.0)).unwrap();
        assert_eq!(m.field_p(0.2, 0.7, 0.0).unwrap(), 0.0);
        assert_eq!(m.field_q(0.2, 0.7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn p_field_for_linear_terminal() {
        // G = S = W_1, γ = 1, t = 0, w = 0, y = 0: p = -γ/2 = -0.5
        let m = MarkovPayoffs::new(Payoff::linear(0.0, 1.0), Payoff::linear(0.0, 1.0), Payoff::zero(), pair(1.0, 1.0)).unwrap();
        assert!((m.field_p(0.0, 0.0, 0.0).unwrap() + 0.5).abs() < 1e-13);
    }

    #[test]
    fn u_matches_finite_difference_of_v() {
        let m = MarkovPayoffs::new(
            Payoff::linear(0.0, -1.0),
            Payoff::zero(),
            Payoff::LogCoshWave { a: 1.5, center: 0.2, offset: 0.0 },
            pair(3.0, 3.0),
        )
        .unwrap();
        let h = 1e-5;
        for (t, w) in [(0.0, 0.0), (0.5, 1.0), (0.9, -0.4)] {
            let fd = (m.field_v(t, w + h).unwrap() - m.field_v(t, w - h).unwrap()) / (2.0 * h);
            assert!((fd - m.field_u(t, w).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn infinite_demander_uses_supplier_aversion() {
        let inf = MarkovPayoffs::new(
            Payoff::linear(0.0, 1.0),
            Payoff::zero(),
            Payoff::linear(0.0, 1.0),
            AgentPair::new(2.0, Aversion::Infinite).unwrap(),
        )
        .unwrap();
        // v = w - (γ/2)(1-t)
        assert!((inf.field_v(0.5, 0.3).unwrap() - (0.3 - 0.5)).abs() < 1e-12);
        // fully offsets: y† with -q = -u  =>  y = -1
        assert!((inf.optimal_strategy(0.5, 0.3).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn inversion_fixed_point() {
        let m = MarkovPayoffs::new(Payoff::linear(0.2, 1.5), Payoff::linear(0.0, 0.6), Payoff::zero(), pair(1.0, 1.0)).unwrap();
        // -q(y) = -(0.6 - 1.5 y); z = -0.6 gives y = 0
        assert!(m.completeness_invert(0.3, 0.0, -0.6).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inversion_fails_without_volatility_loading() {
        let m = MarkovPayoffs::new(Payoff::constant(1.0), Payoff::zero(), Payoff::zero(), pair(1.0, 1.0)).unwrap();
        assert!(matches!(m.completeness_invert(0.0, 0.0, 1.0), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn non_finite_payoff_reported() {
        let m = MarkovPayoffs::new(
            Payoff::linear(0.0, 1.0),
            Payoff::Exponential { scale: 1.0, rate: 800.0 },
            Payoff::zero(),
            pair(1.0, 1.0),
        )
        .unwrap();
        assert!(matches!(m.field_v(0.0, 0.0), Err(Error::Quadrature { .. })));
    }

    #[test]
    fn replication_price_is_convex() {
        let base = |h: Payoff| {
            MarkovPayoffs::new(Payoff::linear(0.0, 1.0), Payoff::linear(0.1, 0.5), h, pair(1.5, 1.0)).unwrap()
        };
        let h1 = Payoff::quadratic(0.0, 1.0, 0.3);
        let h2 = Payoff::LogCoshWave { a: 2.0, center: -0.3, offset: 0.2 };
        let p1 = base(h1.clone()).replication_price(0.0, 0.0).unwrap();
        let p2 = base(h2.clone()).replication_price(0.0, 0.0).unwrap();
        for lam in [0.25, 0.5, 0.75] {
            let mix = Payoff::combine(vec![(lam, h1.clone()), (1.0 - lam, h2.clone())]);
            let pm = base(mix).replication_price(0.0, 0.0).unwrap();
            assert!(pm <= lam * p1 + (1.0 - lam) * p2 + 1e-10);
        }
    }
}
