//! Built-in invariant suite run by the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::{AdmissibleSet, DpScenario};
use crate::efficient::{
    allocation_value, demander_utility_mc, efficient_convexity, efficient_price, eipu, LevyScenario,
};
use crate::error::Result;
use crate::indifference::{
    aggregated_utility, cash_invariance_check, certainty_equivalent, levy_price_curve, AgentPair, Aversion,
    SampleSet,
};
use crate::levy::LevyModel;
use crate::markov::quadratic::QuadraticModel;
use crate::markov::shockwave::{crash_windows, shockwave_path, ShockWaveModel};
use crate::markov::{MarkovPayoffs, Payoff};
use crate::numeric::mix_seed;
use crate::paths::{simulate_batch, simulate_path, PathGrid, ShockSchedule};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("cumulant_vanishes_at_zero", kappa_zero),
    ("cumulant_derivatives", kappa_derivatives),
    ("cash_invariance", cash_invariance),
    ("aversion_monotonicity", aversion_monotone),
    ("two_point_aggregated_utility", two_point_aggregate),
    ("price_curve_convex_with_bid_ask", price_curve_shape),
    ("path_reproducibility", path_reproducibility),
    ("eipu_slope_and_curvature", eipu_consistency),
    ("allocation_value_monte_carlo", allocation_mc),
    ("quadratic_quadrature_fields", quadratic_fields),
    ("burgers_residual", burgers_residual),
    ("tanh_front_quadrature", tanh_front),
    ("crash_property", crash_property),
    ("dp_two_leaf_value", dp_two_leaf),
    ("dp_composition_vs_direct", dp_direct),
    ("dp_buy_and_hold", dp_buy_and_hold),
    ("dp_lemma_three_telescoping", dp_telescoping),
    ("dp_quadratic_convergence", dp_convergence),
];

/// Runs every check with a generator derived from `seed`. Errors inside a
/// check count as failures.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            let (passed, detail) = match check(&mut rng) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

fn families() -> Vec<LevyModel> {
    vec![
        LevyModel::Brownian { b: 0.3, sigma: 1.2 },
        LevyModel::Gamma { alpha: 2.0, beta: 1.5 },
        LevyModel::OneSidedStable { r: 0.8, alpha_exp: 0.6 },
    ]
}

fn interior_point(model: &LevyModel, rng: &mut ChaCha8Rng) -> f64 {
    match model {
        LevyModel::Brownian { .. } => rng.random_range(-3.0..3.0),
        LevyModel::Gamma { alpha, .. } => rng.random_range(-0.9 * alpha..3.0),
        LevyModel::OneSidedStable { .. } => rng.random_range(0.05..3.0),
    }
}

fn kappa_zero(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let worst = families().iter().map(|m| m.kappa(0.0).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let ok = worst.iter().all(|&v| v == 0.0);
    Ok((ok, format!("max |κ(0)| = {:e}", worst.iter().copied().fold(0.0, f64::max))))
}

fn kappa_derivatives(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for m in families() {
        for _ in 0..30 {
            let u = interior_point(&m, rng);
            let h = 1e-5 * (1.0 + u.abs());
            let fd1 = (m.kappa(u + h)? - m.kappa(u - h)?) / (2.0 * h);
            let fd2 = (m.kappa_prime(u + h)? - m.kappa_prime(u - h)?) / (2.0 * h);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-8);
            worst = worst.max(rel(fd1, m.kappa_prime(u)?)).max(rel(fd2, m.kappa_double_prime(u)?));
        }
    }
    Ok((worst < 1e-5, format!("max relative error {worst:e}")))
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize) -> Result<SampleSet> {
    SampleSet::uniform((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
}

fn cash_invariance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s = random_samples(rng, 20)?;
        let a = Aversion::Finite(rng.random_range(0.0..5.0));
        worst = worst.max(cash_invariance_check(&s, a, rng.random_range(-10.0..10.0))?.abs());
    }
    Ok((worst < 1e-10, format!("max deviation {worst:e}")))
}

fn aversion_monotone(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ok = true;
    for _ in 0..50 {
        let s = random_samples(rng, 15)?;
        let (a, b): (f64, f64) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let (lo, hi) = (a.min(b), a.max(b));
        let (vl, vh) = (certainty_equivalent(&s, Aversion::Finite(lo))?, certainty_equivalent(&s, Aversion::Finite(hi))?);
        let vi = certainty_equivalent(&s, Aversion::Infinite)?;
        ok &= vh <= vl + 1e-12 && vi <= vh + 1e-12;
    }
    Ok((ok, "Π nonincreasing in aversion on 50 sample sets".into()))
}

fn two_point_aggregate(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let s = SampleSet::uniform(vec![-1.0, 1.0])?;
    let v = aggregated_utility(&s, &AgentPair::new(1.0, 1.0)?)?;
    let exact = -2.0 * 0.5f64.cosh().ln();
    Ok(((v - exact).abs() < 1e-12, format!("{v} vs {exact}")))
}

fn price_curve_shape(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ok = true;
    let m = LevyModel::Gamma { alpha: 2.0, beta: 1.5 };
    for _ in 0..50 {
        let (z, t, x) = (rng.random_range(-0.5..0.5), rng.random_range(0.0..0.9), rng.random_range(0.0..2.0));
        let y = rng.random_range(0.01..0.5);
        let p = |y: f64| levy_price_curve(&m, 1.0, 0.0, z, y, x, t);
        let h = 0.05;
        let second = p(y + h)? - 2.0 * p(y)? + p(y - h)?;
        ok &= second >= -1e-10 && -p(-y)? <= p(y)? + 1e-12;
    }
    Ok((ok, "second differences >= 0 and -P(z,-y) <= P(z,y)".into()))
}

fn path_reproducibility(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = PathGrid::new(200)?;
    let seed = rng.random();
    let mut ok = true;
    for m in families() {
        let a = simulate_path(&m, &grid, &ShockSchedule::default(), seed)?;
        let b = simulate_path(&m, &grid, &ShockSchedule::default(), seed)?;
        ok &= a == b;
    }
    Ok((ok, "identical seeds give identical paths".into()))
}

fn eipu_consistency(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let model = LevyModel::Brownian { b: rng.random_range(-0.5..0.5), sigma: rng.random_range(0.5..1.5) };
        let agents = AgentPair::new(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0))?;
        let hp = rng.random_range(-1.0..1.0);
        let sc = LevyScenario::new(model, agents, rng.random_range(-1.0..1.0), ShockSchedule::constant(hp), PathGrid::new(10)?)?;
        let (t, x) = (rng.random_range(0.0..0.95), rng.random_range(-1.0..1.0));
        let h = 1e-4;
        let p = |y: f64| efficient_price(&sc, x, hp, t, y);
        let slope = (p(h)? - p(-h)?) / (2.0 * h);
        let curv = (p(h)? - 2.0 * p(0.0)? + p(-h)?) / (h * h);
        let s = eipu(&sc, x, hp, t)?;
        worst.0 = worst.0.max((slope - s).abs() / s.abs().max(1.0));
        worst.1 = worst.1.max((curv - efficient_convexity(&sc, hp, t)?).abs());
    }
    Ok((worst.0 < 1e-6 && worst.1 < 1e-5, format!("slope {:e}, curvature {:e}", worst.0, worst.1)))
}

fn allocation_mc(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let sc = LevyScenario::new(
        LevyModel::Brownian { b: 0.2, sigma: 1.0 },
        AgentPair::new(1.0, 2.0)?,
        0.5,
        ShockSchedule { h: 0.1, initial_value: 0.3, shocks: vec![(0.5, -0.6)] },
        PathGrid::new(20)?,
    )?;
    let paths = simulate_batch(&sc.model, &sc.grid, &sc.schedule, rng.random(), 20_000)?;
    let est = demander_utility_mc(&sc, &paths, &sc.optimal_strategy()?)?;
    let exact = allocation_value(&sc)?;
    let z = (est.value - exact).abs() / est.stderr;
    Ok((z < 3.0, format!("closed form {exact}, MC {} ± {}", est.value, est.stderr)))
}

fn quadratic_fields(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = QuadraticModel { g_load: 0.4, mu: 0.1, sigma: 1.3, a_lin: 0.7, b_quad: 0.5, agents: AgentPair::new(1.0, 2.0)? };
    let q = m.payoffs()?;
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (t, w, y) = (rng.random_range(0.0..0.99), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        worst = worst.max((q.field_v(t, w)? - m.v(t, w)).abs()).max((q.field_p(t, w, y)? - m.p(t, w, y)).abs());
    }
    Ok((worst < 1e-8, format!("max error {worst:e}")))
}

fn burgers_residual(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = ShockWaveModel::with_aggregate(0.0, 1.0, 2.0, -0.6)?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        for j in 0..50 {
            let t = (0.99 * i as f64 / 49.0).clamp(1e-4, 0.99 - 1e-4);
            let w = -3.0 + 6.0 * j as f64 / 49.0;
            worst = worst.max(m.burgers_residual(t, w, 1e-4).abs());
        }
    }
    Ok((worst < 1e-6, format!("max residual {worst:e}")))
}

fn tanh_front(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = ShockWaveModel::with_aggregate(0.0, 1.0, 2.0, -0.6)?;
    let q = m.payoffs()?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (t, w) = (rng.random_range(0.0..0.99), rng.random_range(-2.0..2.0));
        worst = worst.max((q.field_u(t, w)? - m.u(t, w)).abs());
    }
    Ok((worst < 1e-7, format!("max error {worst:e}")))
}

fn crash_property(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = ShockWaveModel::with_aggregate(0.0, 1.0, 2.0, -0.6)?;
    let grid = PathGrid::new(1000)?;
    let bm = LevyModel::Brownian { b: 0.0, sigma: 1.0 };
    let base: u64 = rng.random();
    let (mut crossings, mut ok) = (0usize, true);
    for i in 0..40 {
        let p = simulate_path(&bm, &grid, &ShockSchedule::default(), mix_seed(base, i))?;
        for w in crash_windows(&m, &shockwave_path(&m, &p, &grid)?) {
            crossings += 1;
            ok &= w.drop >= w.bound;
        }
    }
    Ok((ok && crossings > 0, format!("{crossings} crossings")))
}

fn unit_w() -> Payoff {
    Payoff::linear(0.0, 1.0)
}

fn dp_two_leaf(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = MarkovPayoffs::new(unit_w(), Payoff::zero(), unit_w(), AgentPair::new(1.0, 1.0)?)?;
    let v = DpScenario::new(1, p, AdmissibleSet::new(-1.0, 1.0)?)?.value_recursion()?.v0;
    let exact = -2.0 * 0.5f64.cosh().ln();
    Ok(((v - exact).abs() < 1e-8, format!("{v} vs {exact}")))
}

fn dp_direct(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = MarkovPayoffs::new(unit_w(), Payoff::linear(0.0, 0.3), Payoff::quadratic(-0.5, 0.2, 0.5), AgentPair::new(1.0, 1.0)?)?;
    let adm = AdmissibleSet::new(-1.0, 1.0)?.with_delta(0.05).without_refinement();
    let sc = DpScenario::new(5, p, adm)?;
    let gap = (sc.value_recursion()?.v0 - sc.direct_recursion()?).abs();
    Ok((gap < 1e-10, format!("gap {gap:e}")))
}

fn dp_buy_and_hold(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = MarkovPayoffs::new(unit_w(), unit_w(), unit_w(), AgentPair::new(3.0, 1.0)?)?;
    let r = DpScenario::new(6, p, AdmissibleSet::new(-1.0, 1.0)?)?.no_rebalance_check()?;
    Ok((
        r.is_buy_and_hold && r.value_gap.abs() < 1e-8 && (r.y_star - 0.5).abs() < 1e-12,
        format!("y* {}, policy deviation {:e}, value gap {:e}", r.y_star, r.max_policy_deviation, r.value_gap),
    ))
}

fn dp_telescoping(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = MarkovPayoffs::new(unit_w(), Payoff::linear(0.2, 0.5), Payoff::zero(), AgentPair::new(1.3, 1.0)?)?;
    let sc = DpScenario::new(6, p, AdmissibleSet::new(-1.0, 1.0)?)?;
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let j = rng.random_range(0..6);
        let m = rng.random_range(0..=j);
        let (z, eta, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let split = sc.price_curve(j, m, z, eta)? + sc.price_curve(j, m, z - eta, y)?;
        worst = worst.max((split - sc.price_curve(j, m, z, eta + y)?).abs());
    }
    Ok((worst < 1e-10, format!("max gap {worst:e}")))
}

fn dp_convergence(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = QuadraticModel { g_load: 0.0, mu: 0.0, sigma: 1.0, a_lin: 1.0, b_quad: 0.0, agents: AgentPair::new(1.0, 1.0)? };
    let limit = m.v(0.0, 0.0) - m.p(0.0, 0.0, 0.0);
    let rows = crate::dp::convergence_study(&m.payoffs()?, AdmissibleSet::new(-1.0, 1.0)?, &[2, 16], limit)?;
    Ok((rows[1].error < rows[0].error, format!("error(2) {:e}, error(16) {:e}", rows[0].error, rows[1].error)))
}
