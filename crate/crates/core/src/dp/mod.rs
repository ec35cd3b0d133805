//! Discrete-time dynamic programming for the demander's problem on a binomial
//! lattice for `W`.
//!
//! With trading restricted to the times `j/n`, the value of the demander's
//! problem is obtained by composing the sup-convolution operators
//!
//! ```text
//! Ψ_j(F) = sup_{y ∈ A} U_j(F - L_y) + Π_j(L_y),   L_y = Π_{(j+1)/n}(G - yS)
//! ```
//!
//! backwards from `F_n = G + H`; then `V^n_0(0,0) = F_0 - Π_0(G)`. Here `U`
//! is the demander's certainty equivalent (aversion `c`) and `Π` the
//! supplier's (aversion `γ`). Values are stored with the cash position
//! factored out.

mod lattice;

pub use lattice::Lattice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indifference::{AgentPair, Aversion};
use crate::markov::MarkovPayoffs;
use crate::numeric::golden_section_max;
use lattice::ce2;

/// Largest lattice for which policies are evaluated by path enumeration.
pub const MAX_ENUMERATED_PERIODS: usize = 20;

/// Closed interval of admissible demander positions, scanned on a grid of
/// step `delta` (which always contains 0) and optionally refined by
/// golden-section search around the best grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_refine")]
    pub refine: bool,
}

fn default_delta() -> f64 {
    1e-3
}

fn default_refine() -> bool {
    true
}

impl AdmissibleSet {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let set = AdmissibleSet { lo, hi, delta: default_delta(), refine: true };
        set.validate()?;
        Ok(set)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn without_refinement(mut self) -> Self {
        self.refine = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= 0.0 && 0.0 <= self.hi) {
            return Err(Error::Parameter(format!(
                "admissible set [{}, {}] must be a finite interval containing 0",
                self.lo, self.hi
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("y-grid resolution must be > 0, got {}", self.delta)));
        }
        if (self.hi - self.lo) / self.delta > 1e6 {
            return Err(Error::Parameter("admissible y-grid exceeds 10^6 points".into()));
        }
        Ok(())
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// Ascending grid `{kδ} ∩ [lo, hi]` together with the endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let k_lo = (self.lo / self.delta - 1e-9).ceil() as i64;
        let k_hi = (self.hi / self.delta + 1e-9).floor() as i64;
        let mut out = Vec::with_capacity((k_hi - k_lo + 3) as usize);
        if self.lo < k_lo as f64 * self.delta - 1e-12 {
            out.push(self.lo);
        }
        out.extend((k_lo..=k_hi).map(|k| (k as f64 * self.delta).clamp(self.lo, self.hi)));
        if self.hi > k_hi as f64 * self.delta + 1e-12 {
            out.push(self.hi);
        }
        out
    }
}

/// `true` when `(v, y)` beats `(best_v, best_y)`: larger value, then smaller
/// `|y|`, then negative `y`.
fn prefer(v: f64, y: f64, best_v: f64, best_y: f64) -> bool {
    if v != best_v {
        return v > best_v;
    }
    let (a, b) = (y.abs(), best_y.abs());
    if a != b {
        return a < b;
    }
    y < best_y
}

/// A lattice together with terminal payoffs and the admissible set.
#[derive(Debug, Clone)]
pub struct DpScenario {
    pub lattice: Lattice,
    pub payoffs: MarkovPayoffs,
    pub admissible: AdmissibleSet,
    s: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
}

/// Output of the backward induction.
#[derive(Debug, Clone, PartialEq)]
pub struct DpValue {
    /// `V^n_0(0, 0)`.
    pub v0: f64,
    /// `Ψ_0 ∘ … ∘ Ψ_{(n-1)/n}(G + H)` at the root.
    pub composed0: f64,
    /// `Π_0(G)` at the root.
    pub pi_g0: f64,
    /// Composition layers `F_j`, `j = 0..=n`.
    pub composed: Vec<Vec<f64>>,
    /// Cash-separated values `V_j(0, 0) = F_j - Π_j(G)`.
    pub value: Vec<Vec<f64>>,
    /// Demander position held over `(j/n, (j+1)/n]`, `j = 0..n`.
    pub policy: Vec<Vec<f64>>,
}

/// Outcome of the buy-and-hold check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoRebalanceReport {
    pub y_star: f64,
    pub is_buy_and_hold: bool,
    /// Largest `|policy - y*|` over all lattice nodes.
    pub max_policy_deviation: f64,
    /// `V^n_0(0,0) - (U*_0(G+H) - Π_0(G))`.
    pub value_gap: f64,
    /// `U*_0(G+H) - Π_0(G)`.
    pub closed_form: f64,
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub value: f64,
    pub error: f64,
}

impl DpScenario {
    pub fn new(n: usize, payoffs: MarkovPayoffs, admissible: AdmissibleSet) -> Result<Self> {
        payoffs.agents.validate()?;
        admissible.validate()?;
        let lattice = Lattice::new(n)?;
        let leaves = lattice.leaves();
        let eval = |f: &crate::markov::Payoff| -> Result<Vec<f64>> {
            let v: Vec<f64> = leaves.iter().map(|&w| f.value(w)).collect();
            if v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(Error::Overflow("terminal payoff is not finite on the lattice".into()))
            }
        };
        let (s, g, h) = (eval(&payoffs.s)?, eval(&payoffs.g)?, eval(&payoffs.h)?);
        Ok(DpScenario { lattice, payoffs, admissible, s, g, h })
    }

    pub fn agents(&self) -> &AgentPair {
        &self.payoffs.agents
    }

    fn supplier(&self) -> Aversion {
        Aversion::Finite(self.agents().gamma)
    }

    fn demander(&self) -> Aversion {
        self.agents().c
    }

    fn aggregate(&self) -> Aversion {
        Aversion::Finite(self.agents().aggregate())
    }

    pub fn leaf_s(&self) -> &[f64] {
        &self.s
    }

    pub fn leaf_g(&self) -> &[f64] {
        &self.g
    }

    pub fn leaf_h(&self) -> &[f64] {
        &self.h
    }

    /// Leaf values of `G + zS`.
    fn supplier_leaves(&self, z: f64) -> Vec<f64> {
        self.g.iter().zip(&self.s).map(|(g, s)| g + z * s).collect()
    }

    /// Supplier certainty equivalent at node `(j, m)` of `terminal(W_1)`.
    pub fn conditional_pi<F: Fn(f64) -> f64>(&self, j: usize, m: usize, terminal: F) -> Result<f64> {
        let leaves: Vec<f64> = self.lattice.leaves().into_iter().map(terminal).collect();
        self.lattice.conditional_ce(j, m, &leaves, self.supplier())
    }

    /// `Π_j(G + zS)` at node `(j, m)`.
    pub fn pi_g_plus(&self, j: usize, m: usize, z: f64) -> Result<f64> {
        self.lattice.conditional_ce(j, m, &self.supplier_leaves(z), self.supplier())
    }

    /// Price `P_j(z, y) = Π_j(G + zS) - Π_j(G + (z-y)S)` of `y` units bought from a
    /// supplier holding `z` at node `(j, m)`.
    pub fn price_curve(&self, j: usize, m: usize, z: f64, y: f64) -> Result<f64> {
        Ok(self.pi_g_plus(j, m, z)? - self.pi_g_plus(j, m, z - y)?)
    }

    /// `U*_0(G + H)` at node `(j, m)`: certainty equivalent at aggregate aversion.
    pub fn aggregated_utility(&self, j: usize, m: usize) -> Result<f64> {
        let gh: Vec<f64> = self.g.iter().zip(&self.h).map(|(g, h)| g + h).collect();
        self.lattice.conditional_ce(j, m, &gh, self.aggregate())
    }

    /// Sup-convolution objective at node `(j, m)` for position `y`, given the
    /// continuation values at the two children.
    pub fn node_objective(&self, j: usize, m: usize, children: (f64, f64), y: f64) -> Result<f64> {
        if j >= self.lattice.n() {
            return Err(Error::Parameter("no sup-convolution at maturity".into()));
        }
        self.lattice.check_node(j, m)?;
        let l0 = self.pi_g_plus(j + 1, m, -y)?;
        let l1 = self.pi_g_plus(j + 1, m + 1, -y)?;
        Ok(ce2(self.demander(), children.0 - l0, children.1 - l1) + ce2(self.supplier(), l0, l1))
    }

    /// `Ψ_j` applied to a continuation on layer `j + 1`: values and argmax positions on layer `j`.
    pub fn sup_convolution(&self, j: usize, continuation: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if j >= self.lattice.n() {
            return Err(Error::Parameter("no sup-convolution at maturity".into()));
        }
        if continuation.len() != j + 2 {
            return Err(Error::Parameter(format!(
                "continuation has {} values, layer {} has {}",
                continuation.len(),
                j + 1,
                j + 2
            )));
        }
        let grid = self.admissible.grid();
        let lam_next = grid
            .par_iter()
            .map(|&y| {
                let leaves = self.supplier_leaves(-y);
                (0..=j + 1)
                    .map(|m| self.lattice.conditional_ce(j + 1, m, &leaves, self.supplier()))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let (values, policy, _) = self.psi_layer(j, continuation, &lam_next, &grid)?;
        Ok((values, policy))
    }

    /// One backward step given `Π_{j+1}(G - yS)` for every grid `y`. Returns
    /// the values, argmax positions and `Π_j(G - yS)` on layer `j`.
    fn psi_layer(
        &self,
        j: usize,
        cont: &[f64],
        lam_next: &[Vec<f64>],
        grid: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let sup = self.supplier();
        let dem = self.demander();
        let lam: Vec<Vec<f64>> = lam_next
            .par_iter()
            .map(|next| (0..=j).map(|m| ce2(sup, next[m], next[m + 1])).collect())
            .collect();
        let best: Vec<(f64, f64, usize)> = (0..=j)
            .into_par_iter()
            .map(|m| {
                let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
                for (k, &y) in grid.iter().enumerate() {
                    let v = ce2(dem, cont[m] - lam_next[k][m], cont[m + 1] - lam_next[k][m + 1]) + lam[k][m];
                    if prefer(v, y, best.0, best.1) {
                        best = (v, y, k);
                    }
                }
                best
            })
            .collect();
        let refined: Vec<(f64, f64)> = best
            .into_par_iter()
            .enumerate()
            .map(|(m, (v, y, k))| -> Result<(f64, f64)> {
                if !v.is_finite() {
                    return Err(Error::Overflow(format!("sup-convolution at node ({j}, {m})")));
                }
                if !self.admissible.refine || grid.len() < 2 {
                    return Ok((v, y));
                }
                let lo = grid[k.saturating_sub(1)];
                let hi = grid[(k + 1).min(grid.len() - 1)];
                let mut failed = false;
                let (ry, rv) = golden_section_max(
                    |y| match self.node_objective(j, m, (cont[m], cont[m + 1]), y) {
                        Ok(v) => v,
                        Err(_) => {
                            failed = true;
                            f64::NEG_INFINITY
                        }
                    },
                    lo,
                    hi,
                    1e-9,
                );
                if failed {
                    return Err(Error::Overflow(format!("sup-convolution refinement at node ({j}, {m})")));
                }
                // refinement must beat the grid point by more than rounding noise
                Ok(if rv > v + 1e-14 * (1.0 + v.abs()) { (rv, ry) } else { (v, y) })
            })
            .collect::<Result<_>>()?;
        let (values, policy) = refined.into_iter().unzip();
        Ok((values, policy, lam))
    }

    /// Backward induction `F_j = Ψ_j(F_{j+1})` from `F_n = G + H`.
    pub fn value_recursion(&self) -> Result<DpValue> {
        let n = self.lattice.n();
        let grid = self.admissible.grid();
        let zero = grid.iter().position(|&y| y == 0.0).expect("grid contains 0");
        let mut lam: Vec<Vec<f64>> = grid.iter().map(|&y| self.supplier_leaves(-y)).collect();
        let mut composed = vec![Vec::new(); n + 1];
        let mut value = vec![Vec::new(); n + 1];
        let mut policy = vec![Vec::new(); n];
        composed[n] = self.g.iter().zip(&self.h).map(|(g, h)| g + h).collect();
        value[n] = self.h.clone();
        for j in (0..n).rev() {
            let (f, y, next_lam) = self.psi_layer(j, &composed[j + 1], &lam, &grid)?;
            value[j] = f.iter().zip(&next_lam[zero]).map(|(f, p)| f - p).collect();
            composed[j] = f;
            policy[j] = y;
            lam = next_lam;
        }
        let composed0 = composed[0][0];
        let pi_g0 = lam[zero][0];
        Ok(DpValue { v0: composed0 - pi_g0, composed0, pi_g0, composed, value, policy })
    }

    /// Recursion over the supplier's inventory `z` (the demander holds `-z`),
    /// charging each trade its indifference price:
    ///
    /// `W_j(z) = sup_{z' ∈ -A} U_j(W_{j+1}(z')) - P_j(z, z - z')`, `W_n(z) = H - zS`.
    ///
    /// The state is restricted to the admissible grid and no refinement is
    /// applied. Returns `W_0(0)` at the root.
    pub fn direct_recursion(&self) -> Result<f64> {
        let n = self.lattice.n();
        let zs: Vec<f64> = self.admissible.grid().iter().map(|y| -y).collect();
        let sup = self.supplier();
        let dem = self.demander();
        // Π_j(G + zS) per state, current layer
        let mut pi: Vec<Vec<f64>> = zs.iter().map(|&z| self.supplier_leaves(z)).collect();
        let mut w: Vec<Vec<f64>> =
            zs.iter().map(|&z| self.h.iter().zip(&self.s).map(|(h, s)| h - z * s).collect()).collect();
        for j in (0..n).rev() {
            pi = pi.iter().map(|next| (0..=j).map(|m| ce2(sup, next[m], next[m + 1])).collect()).collect();
            let cont: Vec<Vec<f64>> =
                w.iter().map(|next| (0..=j).map(|m| ce2(dem, next[m], next[m + 1])).collect()).collect();
            w = (0..zs.len())
                .into_par_iter()
                .map(|i| {
                    (0..=j)
                        .map(|m| {
                            (0..zs.len())
                                .map(|k| {
                                    let price = pi[i][m] - pi[k][m];
                                    cont[k][m] - price
                                })
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .collect()
                })
                .collect();
        }
        let i0 = zs.iter().position(|&z| z == 0.0).expect("grid contains 0");
        let out = w[i0][0];
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Overflow("direct recursion".into()))
        }
    }

    /// Demander's certainty-equivalent utility from following `policy(j, m)`
    /// (the position held after trading at node `(j, m)`), paying the
    /// indifference price for every trade. Evaluated exactly by enumerating
    /// all `2^n` paths.
    pub fn evaluate_policy<P: Fn(usize, usize) -> f64 + Sync>(&self, policy: P) -> Result<f64> {
        let n = self.lattice.n();
        if n > MAX_ENUMERATED_PERIODS {
            return Err(Error::Parameter(format!(
                "policy evaluation enumerates 2^n paths; n = {n} exceeds {MAX_ENUMERATED_PERIODS}"
            )));
        }
        let wealth = (0..1u64 << n)
            .into_par_iter()
            .map(|bits| -> Result<f64> {
                let (mut held, mut cash, mut m) = (0.0, 0.0, 0usize);
                for j in 0..n {
                    let y = policy(j, m);
                    if !self.admissible.contains(y) {
                        return Err(Error::Parameter(format!("policy position {y} at node ({j}, {m}) is not admissible")));
                    }
                    if y != held {
                        cash -= self.price_curve(j, m, -held, y - held)?;
                    }
                    held = y;
                    m += ((bits >> j) & 1) as usize;
                }
                Ok(self.h[m] + held * self.s[m] + cash)
            })
            .collect::<Result<Vec<f64>>>()?;
        let paths = crate::indifference::SampleSet::uniform(wealth)?;
        crate::indifference::certainty_equivalent(&paths, self.demander())
    }

    /// Position `y*` with `G - y*S = (c/(c+γ))(G + H)` on every leaf.
    pub fn proportional_position(&self) -> Result<f64> {
        let k = self.agents().demander_share();
        let target: Vec<f64> = self.g.iter().zip(&self.h).map(|(g, h)| g - k * (g + h)).collect();
        let ss: f64 = self.s.iter().map(|s| s * s).sum();
        let y = if ss == 0.0 { 0.0 } else { self.s.iter().zip(&target).map(|(s, t)| s * t).sum::<f64>() / ss };
        let resid = self
            .s
            .iter()
            .zip(&target)
            .map(|(s, t)| (t - y * s).abs() / t.abs().max(1.0))
            .fold(0.0, f64::max);
        if resid > 1e-10 {
            return Err(Error::Precondition(format!(
                "no position makes G - yS proportional to G + H (residual {resid:e})"
            )));
        }
        if !self.admissible.contains(y) {
            return Err(Error::Precondition(format!(
                "proportional position {y} lies outside [{}, {}]",
                self.admissible.lo, self.admissible.hi
            )));
        }
        Ok(y)
    }

    /// Checks that the recursion buys `y*` at time 0 and never rebalances, and
    /// that its value equals `U*_0(G + H) - Π_0(G)`.
    pub fn no_rebalance_check(&self) -> Result<NoRebalanceReport> {
        let y_star = self.proportional_position()?;
        let dp = self.value_recursion()?;
        let max_policy_deviation =
            dp.policy.iter().flatten().map(|y| (y - y_star).abs()).fold(0.0, f64::max);
        let closed_form = self.aggregated_utility(0, 0)? - dp.pi_g0;
        Ok(NoRebalanceReport {
            y_star,
            is_buy_and_hold: max_policy_deviation <= self.admissible.delta,
            max_policy_deviation,
            value_gap: dp.v0 - closed_form,
            closed_form,
        })
    }

    /// EIPU at node `(j, m)` in the buy-and-hold regime:
    /// `E[S e^{-A(G+H)}] / E[e^{-A(G+H)}]` with `A = cγ/(c+γ)`.
    pub fn emm_eipu(&self, j: usize, m: usize) -> Result<f64> {
        self.proportional_position()?;
        let gh: Vec<f64> = self.g.iter().zip(&self.h).map(|(g, h)| g + h).collect();
        self.lattice.tilted_mean(j, m, &self.s, &gh, self.agents().aggregate())
    }
}

/// Continuous-time limit `v(0, 0) - p(0, 0, 0)` from the Markov value fields.
pub fn markov_limit(payoffs: &MarkovPayoffs) -> Result<f64> {
    Ok(payoffs.field_v(0.0, 0.0)? - payoffs.field_p(0.0, 0.0, 0.0)?)
}

/// `V^n_0(0, 0)` and its distance to `limit` for each lattice size.
pub fn convergence_study(
    payoffs: &MarkovPayoffs,
    admissible: AdmissibleSet,
    n_list: &[usize],
    limit: f64,
) -> Result<Vec<ConvergenceRow>> {
    n_list
        .iter()
        .map(|&n| {
            let value = DpScenario::new(n, payoffs.clone(), admissible)?.value_recursion()?.v0;
            Ok(ConvergenceRow { n, value, error: (value - limit).abs() })
        })
        .collect()
}

/// Initial EIPU `μ - (cγ/(c+γ))(α+β)σ²` of the buy-and-hold Bachelier market
/// `S = μ + σW_1`, `G = βS`, `H = αS`.
pub fn bachelier_eipu(mu: f64, sigma: f64, alpha: f64, beta: f64, agents: &AgentPair) -> f64 {
    mu - agents.aggregate() * (alpha + beta) * sigma * sigma
}

/// Initial EIPU `ζ exp(σ²(½ - (cγ/(c+γ))α))` of the buy-and-hold Black–Scholes
/// market `S = ζ e^{σW_1}` with `G + H = ασW_1`.
pub fn black_scholes_eipu(zeta: f64, sigma: f64, alpha: f64, agents: &AgentPair) -> f64 {
    zeta * (sigma * sigma * (0.5 - agents.aggregate() * alpha)).exp()
}
