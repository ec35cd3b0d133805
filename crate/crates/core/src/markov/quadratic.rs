//! Quadratic-Gaussian market: `S = μ + σW_1`, `G = gS`,
//! `H = a W_1 + (b/2) W_1²`, with closed-form fields.

use serde::{Deserialize, Serialize};

use super::{MarkovPayoffs, Payoff};
use crate::error::{Error, Result};
use crate::indifference::{check_time, AgentPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    pub g_load: f64,
    pub mu: f64,
    pub sigma: f64,
    pub a_lin: f64,
    pub b_quad: f64,
    pub agents: AgentPair,
}

/// Closed-form snapshot of the efficient market at `(t, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticSnapshot {
    pub v: f64,
    /// `p(t, w, 0)`.
    pub p_at: f64,
    pub y_star: f64,
    pub s_star: f64,
    pub convexity: f64,
    pub volatility: f64,
}

impl QuadraticModel {
    pub fn validate(&self) -> Result<()> {
        self.agents.validate()?;
        if self.sigma == 0.0 || !self.sigma.is_finite() {
            return Err(Error::Parameter("quadratic model requires sigma != 0".into()));
        }
        // c + γ + cγb > 0, divided through by c + γ
        if 1.0 + self.agents.aggregate() * self.b_quad <= 0.0 {
            return Err(Error::Parameter(format!(
                "quadratic model requires c + gamma + c*gamma*b > 0 (b = {})",
                self.b_quad
            )));
        }
        Ok(())
    }

    /// Same market expressed as generic Markov payoffs.
    pub fn payoffs(&self) -> Result<MarkovPayoffs> {
        self.validate()?;
        let s = Payoff::linear(self.mu, self.sigma);
        let g = Payoff::linear(self.g_load * self.mu, self.g_load * self.sigma);
        let h = Payoff::quadratic(0.0, self.a_lin, 0.5 * self.b_quad);
        MarkovPayoffs::new(s, g, h, self.agents)
    }

    fn denominator(&self, t: f64) -> f64 {
        1.0 + self.agents.aggregate() * self.b_quad * (1.0 - t)
    }

    fn loading(&self, w: f64) -> f64 {
        self.g_load * self.sigma + self.a_lin + self.b_quad * w
    }

    pub fn v(&self, t: f64, w: f64) -> f64 {
        let agg = self.agents.aggregate();
        let tau = 1.0 - t;
        let base = self.g_load * self.mu
            + (self.g_load * self.sigma + self.a_lin) * w
            + 0.5 * self.b_quad * w * w;
        if agg == 0.0 {
            return base + 0.5 * self.b_quad * tau;
        }
        let l = self.loading(w);
        base - 0.5 * agg * l * l * tau / self.denominator(t)
            + (agg * self.b_quad * tau).ln_1p() / (2.0 * agg)
    }

    pub fn p(&self, t: f64, w: f64, y: f64) -> f64 {
        let k = self.g_load - y;
        k * self.mu + k * self.sigma * w - 0.5 * self.agents.gamma * k * k * self.sigma * self.sigma * (1.0 - t)
    }

    pub fn v_w(&self, t: f64, w: f64) -> f64 {
        self.loading(w) / self.denominator(t)
    }

    pub fn p_w(&self, y: f64) -> f64 {
        (self.g_load - y) * self.sigma
    }

    pub fn y_star(&self, t: f64, w: f64) -> f64 {
        self.g_load - self.loading(w) / self.sigma * self.agents.demander_share() / self.denominator(t)
    }

    pub fn s_star(&self, t: f64, w: f64) -> f64 {
        let y = self.y_star(t, w);
        self.mu + self.sigma * w - self.agents.gamma * self.sigma * self.sigma * (1.0 - t) * (self.g_load - y)
    }

    pub fn convexity(&self, t: f64) -> f64 {
        self.agents.gamma * self.sigma * self.sigma * (1.0 - t)
    }

    /// Instantaneous variance rate of `S*`.
    pub fn volatility(&self, t: f64) -> f64 {
        let d = self.denominator(t);
        self.sigma * self.sigma / (d * d)
    }

    /// Time average of [`Self::volatility`] over `[0, 1]`.
    pub fn mean_volatility(&self) -> f64 {
        let d1 = self.denominator(0.0);
        self.sigma * self.sigma / d1
    }
}

/// Demander's terminal wealth `H + Y_{last} S - Σ P_{t_j}(-Y_{j-1}, ΔY_j)` from
/// trading to `Y*(t_j, W_{t_j})` at every grid time of a factor path, paying
/// the supplier's indifference price `p(t,w,Y_{j-1}) - p(t,w,Y_j)` for each trade.
pub fn hedged_terminal_wealth(model: &QuadraticModel, w_path: &[f64]) -> Result<f64> {
    model.validate()?;
    let n = w_path.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
        Error::Parameter("factor path needs at least two points".into())
    })?;
    let mut held = 0.0;
    let mut cash = 0.0;
    for (j, &w) in w_path[..n].iter().enumerate() {
        let t = j as f64 / n as f64;
        let y = model.y_star(t, w);
        cash -= model.p(t, w, held) - model.p(t, w, y);
        held = y;
    }
    let w1 = w_path[n];
    let h = model.a_lin * w1 + 0.5 * model.b_quad * w1 * w1;
    Ok(h + held * (model.mu + model.sigma * w1) + cash)
}

pub fn quadratic_closed_forms(model: &QuadraticModel, t: f64, w: f64) -> Result<QuadraticSnapshot> {
    model.validate()?;
    check_time(t)?;
    Ok(QuadraticSnapshot {
        v: model.v(t, w),
        p_at: model.p(t, w, 0.0),
        y_star: model.y_star(t, w),
        s_star: model.s_star(t, w),
        convexity: model.convexity(t),
        volatility: model.volatility(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indifference::Aversion;

    fn model(g: f64, mu: f64, sigma: f64, a: f64, b: f64, gamma: f64, c: f64) -> QuadraticModel {
        QuadraticModel { g_load: g, mu, sigma, a_lin: a, b_quad: b, agents: AgentPair::new(gamma, c).unwrap() }
    }

    #[test]
    fn closed_form_values() {
        let m = model(0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert!((m.v(0.0, 0.0) - 1.5f64.ln()).abs() < 1e-15);
        let m = model(1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert_eq!(m.p(0.0, 0.0, 0.0), -0.5);
        let m = model(0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(m.y_star(0.0, 0.0), -0.5);
        let m = model(0.3, 1.0, 2.0, 0.5, 0.0, 1.0, 4.0);
        for t in [0.0, 0.3, 0.9] {
            assert!((m.volatility(t) - 4.0).abs() < 1e-14);
        }
        let m = model(0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert!((m.volatility(0.0) - 4.0 / 9.0).abs() < 1e-15);
        assert!((m.convexity(0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn s_star_matches_paper_simplification() {
        // μ + σ((c+γ)W - (gσ+a)cγ(1-t)) / (c+γ+cγb(1-t))
        let (g, mu, sigma, a, b, gamma, c) = (0.4, 0.2, 1.3, -0.7, 0.5, 1.5, 2.0);
        let m = model(g, mu, sigma, a, b, gamma, c);
        for (t, w) in [(0.0, 0.1), (0.5, -1.0), (0.8, 2.0)] {
            let tau = 1.0 - t;
            let alt = mu + sigma * ((c + gamma) * w - (g * sigma + a) * c * gamma * tau)
                / (c + gamma + c * gamma * b * tau);
            assert!((m.s_star(t, w) - alt).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(model(0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0).validate().is_err());
        // c + γ + cγb = 2 + b <= 0
        assert!(model(0.0, 0.0, 1.0, 1.0, -2.0, 1.0, 1.0).validate().is_err());
        assert!(model(0.0, 0.0, 1.0, 1.0, -1.9, 1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let m = model(0.5, 0.3, 1.2, 0.8, 0.6, 1.0, 2.0);
        let q = m.payoffs().unwrap();
        for (t, w, y) in [(0.0, 0.0, 0.0), (0.3, 1.1, -0.4), (0.95, -2.0, 1.5)] {
            assert!((q.field_v(t, w).unwrap() - m.v(t, w)).abs() < 1e-8);
            assert!((q.field_p(t, w, y).unwrap() - m.p(t, w, y)).abs() < 1e-8);
            assert!((q.field_u(t, w).unwrap() - m.v_w(t, w)).abs() < 1e-8);
            assert!((q.field_q(t, w, y).unwrap() - m.p_w(y)).abs() < 1e-8);
            assert!((q.optimal_strategy(t, w).unwrap() - m.y_star(t, w)).abs() < 1e-8);
            assert!((q.eipu(t, w).unwrap() - m.s_star(t, w)).abs() < 1e-8);
            let ys = m.y_star(t, w);
            assert!((q.convexity_at(t, w, ys).unwrap() - m.convexity(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn completeness_inverse_is_affine() {
        let m = model(0.7, 0.0, 2.0, 0.0, 0.0, 1.0, 1.0);
        let q = m.payoffs().unwrap();
        for z in [-3.0, 0.0, 0.5, 4.0] {
            let y = q.completeness_invert(0.2, 0.4, z).unwrap();
            assert!((y - (0.7 + z / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn perfect_hedge_error_shrinks_like_root_n() {
        use crate::levy::LevyModel;
        use crate::paths::{simulate_path, PathGrid, ShockSchedule};
        let m = QuadraticModel {
            g_load: 0.5,
            mu: 0.2,
            sigma: 1.0,
            a_lin: 1.0,
            b_quad: 0.5,
            agents: AgentPair::new(1.0, Aversion::Infinite).unwrap(),
        };
        let target = m.v(0.0, 0.0) - m.p(0.0, 0.0, 0.0);
        let bm = LevyModel::brownian(0.0, 1.0).unwrap();
        let fine = PathGrid::new(10_000).unwrap();
        let mut e = [0.0f64; 2];
        // c = ∞: wealth from trading to Y* on a grid converges to Π_0(G+H) - Π_0(G)
        for seed in 0..400 {
            let p = simulate_path(&bm, &fine, &ShockSchedule::default(), seed).unwrap();
            let coarse: Vec<f64> = p.x.iter().step_by(25).copied().collect();
            e[0] += (hedged_terminal_wealth(&m, &coarse).unwrap() - target).powi(2);
            e[1] += (hedged_terminal_wealth(&m, &p.x).unwrap() - target).powi(2);
        }
        let ratio = (e[0] / e[1]).sqrt();
        assert!(e[1] < e[0]);
        assert!((2.5..10.0).contains(&ratio), "rms ratio {ratio}");
    }

    #[test]
    fn infinite_demander_limit() {
        let m = QuadraticModel {
            g_load: 0.0,
            mu: 0.0,
            sigma: 1.0,
            a_lin: 1.0,
            b_quad: 0.5,
            agents: AgentPair::new(1.0, Aversion::Infinite).unwrap(),
        };
        // Y* = g - (gσ+a+bw)/σ / (1 + γb(1-t))
        assert!((m.y_star(0.0, 0.0) + 1.0 / 1.5).abs() < 1e-15);
        let q = m.payoffs().unwrap();
        assert!((q.field_v(0.0, 0.4).unwrap() - m.v(0.0, 0.4)).abs() < 1e-8);
    }
}
