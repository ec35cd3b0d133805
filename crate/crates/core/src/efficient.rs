//! Efficient market for a Lévy driver: the demander's optimal position, the
//! efficient price curve at the optimum, EIPU, risk premium, convexity,
//! realized P&L and the allocation value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indifference::{AgentPair, Aversion};
use crate::levy::LevyModel;
use crate::numeric::{compensated_sum, log_sum_exp_logw};
use crate::paths::{PathGrid, PathSample, ShockSchedule};

/// Supplier endowment `G = aS` with `S = X_1`, demander endowment
/// `H = h + ∫ H' dX`, on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyScenario {
    pub model: LevyModel,
    pub agents: AgentPair,
    pub a: f64,
    pub schedule: ShockSchedule,
    pub grid: PathGrid,
}

impl LevyScenario {
    pub fn new(
        model: LevyModel,
        agents: AgentPair,
        a: f64,
        schedule: ShockSchedule,
        grid: PathGrid,
    ) -> Result<Self> {
        let s = LevyScenario { model, agents, a, schedule, grid };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.agents.validate()?;
        if self.agents.gamma <= 0.0 {
            return Err(Error::Parameter("the supplier must be risk averse (gamma > 0)".into()));
        }
        let gamma = self.agents.gamma;
        self.model.kappa(gamma * self.a)?;
        for hp in self.schedule.on_grid(&self.grid)? {
            self.model.kappa(self.aggregate_position(hp))?;
            let y = optimal_position(&self.agents, self.a, hp);
            self.model.kappa(gamma * (self.a - y))?;
        }
        Ok(())
    }

    /// `cγ/(c+γ)·(a + H')`, the cumulant argument at the optimum.
    pub fn aggregate_position(&self, h_prime: f64) -> f64 {
        self.agents.aggregate() * (self.a + h_prime)
    }

    pub fn h_prime(&self) -> Result<Vec<f64>> {
        self.schedule.on_grid(&self.grid)
    }

    /// `Y*` held over each grid step.
    pub fn optimal_strategy(&self) -> Result<Vec<f64>> {
        let hp = self.h_prime()?;
        Ok(hp[..self.grid.n_steps]
            .iter()
            .map(|&h| optimal_position(&self.agents, self.a, h))
            .collect())
    }
}

/// `γ/(c+γ)·a - c/(c+γ)·H'`; `-H'` when `c = ∞`.
pub fn optimal_position(agents: &AgentPair, a: f64, h_prime: f64) -> f64 {
    agents.supplier_share() * a - agents.demander_share() * h_prime
}

/// Efficient infinitesimal price per unit.
pub fn eipu(scenario: &LevyScenario, x_t: f64, h_prime_t: f64, t: f64) -> Result<f64> {
    let slope = scenario.model.kappa_prime(scenario.aggregate_position(h_prime_t))?;
    Ok(x_t + (1.0 - t) * slope)
}

pub fn risk_premium(scenario: &LevyScenario, h_prime_t: f64, t: f64) -> Result<f64> {
    let m = &scenario.model;
    Ok((1.0 - t) * (m.kappa_prime(0.0)? - m.kappa_prime(scenario.aggregate_position(h_prime_t))?))
}

pub fn efficient_convexity(scenario: &LevyScenario, h_prime_t: f64, t: f64) -> Result<f64> {
    let k2 = scenario.model.kappa_double_prime(scenario.aggregate_position(h_prime_t))?;
    Ok(-scenario.agents.gamma * (1.0 - t) * k2)
}

/// Price of `y` units quoted against the optimal demander position.
pub fn efficient_price(
    scenario: &LevyScenario,
    x_t: f64,
    h_prime_t: f64,
    t: f64,
    y: f64,
) -> Result<f64> {
    let gamma = scenario.agents.gamma;
    let u = scenario.aggregate_position(h_prime_t);
    let held = scenario.model.kappa(u)?;
    let after = scenario.model.kappa(u - gamma * y)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(y * x_t + (1.0 - t) / gamma * (held - after))
}

fn check_strategy(scenario: &LevyScenario, path: &PathSample, strategy: &[f64]) -> Result<()> {
    let n = scenario.grid.n_steps;
    if strategy.len() != n || path.increments.len() != n {
        return Err(Error::Parameter(format!(
            "strategy/path length mismatch: {} positions, {} increments, {n} steps",
            strategy.len(),
            path.increments.len()
        )));
    }
    Ok(())
}

/// Realized P&L of holding `strategy[i]` over step `i` (decided at `tᵢ`),
/// starting from a zero position.
pub fn realized_pnl(scenario: &LevyScenario, path: &PathSample, strategy: &[f64]) -> Result<f64> {
    check_strategy(scenario, path, strategy)?;
    let gamma = scenario.agents.gamma;
    let a = scenario.a;
    let dt = scenario.grid.dt();
    let model = &scenario.model;
    let base = model.kappa(gamma * a)?;
    let mut terms = Vec::with_capacity(2 * strategy.len());
    for (&y, &dx) in strategy.iter().zip(&path.increments) {
        terms.push(y * dx);
        terms.push((model.kappa(gamma * (a - y))? - base) / gamma * dt);
    }
    Ok(compensated_sum(terms))
}

/// Demander's terminal wealth `H + I(Y)` along one path.
pub fn terminal_wealth(scenario: &LevyScenario, path: &PathSample, strategy: &[f64]) -> Result<f64> {
    let pnl = realized_pnl(scenario, path, strategy)?;
    let signal = compensated_sum(
        path.h_prime[..scenario.grid.n_steps]
            .iter()
            .zip(&path.increments)
            .map(|(h, dx)| h * dx),
    );
    Ok(scenario.schedule.h + signal + pnl)
}

/// Closed-form maximal demander utility `U*(G+H) - Π(G)` for a deterministic schedule.
pub fn allocation_value(scenario: &LevyScenario) -> Result<f64> {
    scenario.validate()?;
    let gamma = scenario.agents.gamma;
    let agg = scenario.agents.aggregate();
    let dt = scenario.grid.dt();
    let hp = scenario.h_prime()?;
    let mut integral = Vec::with_capacity(scenario.grid.n_steps);
    for &h in &hp[..scenario.grid.n_steps] {
        integral.push(scenario.model.kappa(scenario.aggregate_position(h))? * dt);
    }
    Ok(scenario.schedule.h + compensated_sum(integral) / agg
        - scenario.model.kappa(gamma * scenario.a)? / gamma)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Exponential utility of a sample of terminal wealths, with a delta-method
/// standard error.
pub fn utility_estimate(wealth: &[f64], aversion: Aversion) -> Estimate {
    let n = wealth.len() as f64;
    match aversion {
        Aversion::Infinite => Estimate {
            value: wealth.iter().copied().fold(f64::INFINITY, f64::min),
            stderr: 0.0,
        },
        Aversion::Finite(c) if c == 0.0 => {
            let (value, stderr) = crate::numeric::mean_and_stderr(wealth);
            Estimate { value, stderr }
        }
        Aversion::Finite(c) => {
            let exps: Vec<f64> = wealth.iter().map(|w| -c * w).collect();
            let log_w = vec![-(n.ln()); wealth.len()];
            let log_mean = log_sum_exp_logw(&exps, &log_w);
            // relative standard error of the mean of exp(-c W), computed in shifted form
            let rel: Vec<f64> = exps.iter().map(|e| (e - log_mean).exp()).collect();
            let var = compensated_sum(rel.iter().map(|r| (r - 1.0) * (r - 1.0))) / (n - 1.0);
            Estimate { value: -log_mean / c, stderr: (var / n).sqrt() / c }
        }
    }
}

/// Monte Carlo demander utility `U_0(H + I(Y))` for a fixed strategy.
pub fn demander_utility_mc(
    scenario: &LevyScenario,
    paths: &[PathSample],
    strategy: &[f64],
) -> Result<Estimate> {
    let wealth: Vec<f64> = paths
        .par_iter()
        .map(|p| terminal_wealth(scenario, p, strategy))
        .collect::<Result<_>>()?;
    Ok(utility_estimate(&wealth, scenario.agents.c))
}

/// Per-time efficient quantities along one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficientRow {
    pub t: f64,
    pub x: f64,
    pub h_prime: f64,
    pub y_star: f64,
    pub s_star: f64,
    pub risk_premium: f64,
    pub convexity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficientPathRecord {
    pub rows: Vec<EfficientRow>,
    pub pnl: f64,
    pub terminal_wealth: f64,
}

/// Efficient quantities along a path when the demander follows `Y*`.
pub fn efficient_path(scenario: &LevyScenario, path: &PathSample) -> Result<EfficientPathRecord> {
    let grid = &scenario.grid;
    let mut rows = Vec::with_capacity(grid.n_steps + 1);
    for i in 0..=grid.n_steps {
        let t = grid.time(i);
        let hp = path.h_prime[i];
        rows.push(EfficientRow {
            t,
            x: path.x[i],
            h_prime: hp,
            y_star: optimal_position(&scenario.agents, scenario.a, hp),
            s_star: eipu(scenario, path.x[i], hp, t)?,
            risk_premium: risk_premium(scenario, hp, t)?,
            convexity: efficient_convexity(scenario, hp, t)?,
        });
    }
    let strategy = scenario.optimal_strategy()?;
    Ok(EfficientPathRecord {
        rows,
        pnl: realized_pnl(scenario, path, &strategy)?,
        terminal_wealth: terminal_wealth(scenario, path, &strategy)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indifference::levy_price_curve;
    use crate::paths::{simulate_batch, simulate_path};

    fn bm_scenario(b: f64, sigma: f64, gamma: f64, c: f64, a: f64, hp: f64) -> LevyScenario {
        LevyScenario::new(
            LevyModel::brownian(b, sigma).unwrap(),
            AgentPair::new(gamma, c).unwrap(),
            a,
            ShockSchedule::constant(hp),
            PathGrid::new(50).unwrap(),
        )
        .unwrap()
    }

    fn gamma_scenario() -> LevyScenario {
        LevyScenario::new(
            LevyModel::gamma(2.0, 1.0).unwrap(),
            AgentPair::new(1.0, 1.0).unwrap(),
            1.0,
            ShockSchedule::constant(0.0),
            PathGrid::new(50).unwrap(),
        )
        .unwrap()
    }

    /// Negated §3 bound objective: the demander's per-unit-time certainty
    /// equivalent drift, maximised over y by brute force.
    fn objective(model: &LevyModel, gamma: f64, c: f64, a: f64, hp: f64, y: f64) -> f64 {
        model.kappa(c * (hp + y)).unwrap() / c + (model.kappa(gamma * (a - y)).unwrap() - model.kappa(gamma * a).unwrap()) / gamma
    }

    #[test]
    fn optimal_position_examples() {
        assert_eq!(optimal_position(&AgentPair::new(1.0, 1.0).unwrap(), 1.0, 0.0), 0.5);
        assert_eq!(optimal_position(&AgentPair::new(2.0, 5.0).unwrap(), 0.0, 0.0), 0.0);
        let pair = AgentPair::new(1.0, 3.0).unwrap();
        let y = optimal_position(&pair, 2.0, 1.0);
        assert!((y + 0.25).abs() < 1e-15);
        // grid search over the per-step objective
        let m = LevyModel::brownian(0.1, 1.3).unwrap();
        let best = (-4000..=4000)
            .map(|k| k as f64 * 1e-4)
            .max_by(|&p, &q| objective(&m, 1.0, 3.0, 2.0, 1.0, p).total_cmp(&objective(&m, 1.0, 3.0, 2.0, 1.0, q)))
            .unwrap();
        assert!((best - y).abs() < 1e-4);
        let inf = AgentPair::new(1.0, Aversion::Infinite).unwrap();
        assert_eq!(optimal_position(&inf, 3.0, 0.7), -0.7);
    }

    #[test]
    fn eipu_examples() {
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(eipu(&s, 0.0, 0.0, 0.0).unwrap(), -0.5);
        assert_eq!(eipu(&s, 0.37, 0.0, 1.0).unwrap(), 0.37);
        let g = gamma_scenario();
        assert!((eipu(&g, 0.3, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn premium_and_convexity_examples() {
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(risk_premium(&s, -1.0, 0.3).unwrap(), 0.0);
        assert_eq!(risk_premium(&s, 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(risk_premium(&s, 0.0, 0.5).unwrap(), 0.25);
        for hp in [-2.0, 0.0, 3.0] {
            assert_eq!(efficient_convexity(&s, hp, 0.0).unwrap(), 1.0);
            assert_eq!(efficient_convexity(&s, hp, 1.0).unwrap(), 0.0);
        }
        let g = gamma_scenario();
        assert!((efficient_convexity(&g, 0.0, 0.0).unwrap() - 0.16).abs() < 1e-15);
    }

    #[test]
    fn efficient_price_examples() {
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(efficient_price(&s, 0.4, 0.0, 0.2, 0.0).unwrap(), 0.0);
        assert!(efficient_price(&s, 0.0, 0.0, 0.0, 1.0).unwrap().abs() < 1e-15);
        let sell = efficient_price(&s, 0.0, 0.0, 0.0, -1.0).unwrap();
        assert!((sell - 1.0).abs() < 1e-15);
        assert!(-sell <= efficient_price(&s, 0.0, 0.0, 0.0, 1.0).unwrap());
    }

    #[test]
    fn efficient_price_matches_indifference_curve_at_optimum() {
        // P_t(-Y*, y) from the generic price curve with z = -Y*
        let s = bm_scenario(0.2, 0.8, 1.5, 2.0, 0.7, 0.3);
        let y_star = optimal_position(&s.agents, s.a, 0.3);
        for y in [-0.4, 0.1, 0.9] {
            let direct = levy_price_curve(&s.model, 1.5, 0.7, -y_star, y, 0.25, 0.4).unwrap();
            let eff = efficient_price(&s, 0.25, 0.3, 0.4, y).unwrap();
            assert!((direct - eff).abs() < 1e-13);
        }
    }

    #[test]
    fn slope_and_curvature_consistency() {
        let g = gamma_scenario();
        let (x, hp, t) = (0.2, 0.3, 0.35);
        let h = 1e-4;
        let p = |y: f64| efficient_price(&g, x, hp, t, y).unwrap();
        let slope = (p(h) - p(-h)) / (2.0 * h);
        assert!((slope - eipu(&g, x, hp, t).unwrap()).abs() < 1e-6);
        let curv = (p(h) - 2.0 * p(0.0) + p(-h)) / (h * h);
        assert!((curv - efficient_convexity(&g, hp, t).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn shock_response_signs() {
        let base = LevyScenario::new(
            LevyModel::gamma(2.0, 1.0).unwrap(),
            AgentPair::new(1.0, 2.0).unwrap(),
            0.5,
            ShockSchedule { h: 0.0, initial_value: 0.2, shocks: vec![(0.5, 0.8)] },
            PathGrid::new(20).unwrap(),
        )
        .unwrap();
        let hp = base.h_prime().unwrap();
        let (before, after) = (hp[9], hp[10]);
        assert!(after > before && base.a + before >= 0.0);
        let t = 0.5;
        let ds = eipu(&base, 0.4, after, t).unwrap() - eipu(&base, 0.4, before, t).unwrap();
        let dp = risk_premium(&base, after, t).unwrap() - risk_premium(&base, before, t).unwrap();
        let dc = efficient_convexity(&base, after, t).unwrap() - efficient_convexity(&base, before, t).unwrap();
        assert!(ds <= 0.0);
        assert!(dp >= 0.0);
        // -κ'' is decreasing for the gamma family (κ''' > 0), so the convexity jump follows it
        let k3 = base.model.kappa_triple_prime(base.aggregate_position(before)).unwrap();
        assert!(k3 > 0.0);
        assert!(dc <= 0.0);
    }

    #[test]
    fn pnl_examples() {
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let grid = s.grid;
        let p = simulate_path(&s.model, &grid, &s.schedule, 4).unwrap();
        assert_eq!(realized_pnl(&s, &p, &vec![0.0; 50]).unwrap(), 0.0);
        // degenerate path: equals -P_0(0, y)
        let flat = bm_scenario(0.0, 0.0, 1.0, 1.0, 0.4, 0.0);
        let fp = simulate_path(&flat.model, &grid, &flat.schedule, 4).unwrap();
        let y = 0.6;
        let pnl = realized_pnl(&flat, &fp, &vec![y; 50]).unwrap();
        let expected = flat.model.kappa(1.0 * (0.4 - y)).unwrap() - flat.model.kappa(0.4).unwrap();
        assert!((pnl - expected).abs() < 1e-13);
        let price = levy_price_curve(&flat.model, 1.0, 0.4, 0.0, y, 0.0, 0.0).unwrap();
        assert!((pnl + price).abs() < 1e-13);
    }

    #[test]
    fn pnl_matches_trade_by_trade_accounting() {
        // Y_1 X_1 - Σ P_t(-Y_t, ΔY_t) evaluated directly from the price curve
        let s = LevyScenario::new(
            LevyModel::gamma(3.0, 2.0).unwrap(),
            AgentPair::new(0.8, 1.2).unwrap(),
            0.5,
            ShockSchedule::constant(0.0),
            PathGrid::new(40).unwrap(),
        )
        .unwrap();
        let path = simulate_path(&s.model, &s.grid, &s.schedule, 21).unwrap();
        let strategy: Vec<f64> = (0..40).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
        let mut cost = 0.0;
        let mut held = 0.0;
        for (i, &y) in strategy.iter().enumerate() {
            let t = s.grid.time(i);
            cost += levy_price_curve(&s.model, 0.8, 0.5, -held, y - held, path.x[i], t).unwrap();
            held = y;
        }
        let direct = held * path.x[40] - cost;
        let formula = realized_pnl(&s, &path, &strategy).unwrap();
        assert!((direct - formula).abs() < 1e-12, "{direct} vs {formula}");
    }

    #[test]
    fn pnl_expectation_for_constant_unit_holding() {
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let paths = simulate_batch(&s.model, &s.grid, &s.schedule, 10, 100_000).unwrap();
        let strat = vec![1.0; 50];
        let pnls: Vec<f64> = paths.iter().map(|p| realized_pnl(&s, p, &strat).unwrap()).collect();
        let (mean, se) = crate::numeric::mean_and_stderr(&pnls);
        assert!((mean + 0.5).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn allocation_examples() {
        let zero = bm_scenario(0.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(allocation_value(&zero).unwrap(), 0.0);
        let s = bm_scenario(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert!((allocation_value(&s).unwrap() - 0.25).abs() < 1e-14);
        // c = ∞: Π(G+H) - Π(G) = (κ(γ(a+H')) - κ(γa))/γ for constant H'
        let inf = LevyScenario::new(
            LevyModel::brownian(0.1, 1.0).unwrap(),
            AgentPair::new(2.0, Aversion::Infinite).unwrap(),
            0.5,
            ShockSchedule::constant(0.4),
            PathGrid::new(10).unwrap(),
        )
        .unwrap();
        let m = inf.model;
        let expected = (m.kappa(2.0 * 0.9).unwrap() - m.kappa(1.0).unwrap()) / 2.0;
        assert!((allocation_value(&inf).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn inadmissible_scenario_rejected() {
        let r = LevyScenario::new(
            LevyModel::gamma(1.0, 1.0).unwrap(),
            AgentPair::new(2.0, 2.0).unwrap(),
            -0.6,
            ShockSchedule::constant(0.0),
            PathGrid::new(10).unwrap(),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn efficient_path_record_invariants() {
        let s = LevyScenario::new(
            LevyModel::brownian(0.3, 1.0).unwrap(),
            AgentPair::new(1.0, 2.0).unwrap(),
            0.5,
            ShockSchedule { h: 0.1, initial_value: 0.0, shocks: vec![(0.5, 1.0)] },
            PathGrid::new(20).unwrap(),
        )
        .unwrap();
        let path = simulate_path(&s.model, &s.grid, &s.schedule, 3).unwrap();
        let rec = efficient_path(&s, &path).unwrap();
        let tilde = crate::paths::martingale_component(&s.model, &path, &s.grid).unwrap();
        for (row, xt) in rec.rows.iter().zip(&tilde) {
            assert!((row.s_star - (xt - row.risk_premium)).abs() < 1e-12);
            assert!(row.convexity >= 0.0);
        }
        assert_eq!(rec.rows.len(), 21);
    }
}
