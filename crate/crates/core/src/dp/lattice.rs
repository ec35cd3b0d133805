use crate::error::{Error, Result};
use crate::indifference::Aversion;
use crate::numeric::{log_mean_exp2, log_sum_exp_logw};

/// Recombining binomial lattice for a standard Brownian factor on `[0, 1]`.
///
/// Node `(j, m)` sits at time `j/n` and `W = (2m - j)/√n`, `m = 0..=j`; its
/// children are `(j+1, m)` (down) and `(j+1, m+1)` (up), each with probability ½.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    n: usize,
    ln_fact: Vec<f64>,
}

impl Lattice {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("lattice needs at least one period".into()));
        }
        let mut ln_fact = vec![0.0; n + 1];
        for i in 1..=n {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        Ok(Lattice { n, ln_fact })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn w(&self, j: usize, m: usize) -> f64 {
        (2.0 * m as f64 - j as f64) / (self.n as f64).sqrt()
    }

    pub fn layer_size(&self, j: usize) -> usize {
        j + 1
    }

    /// Factor values at maturity.
    pub fn leaves(&self) -> Vec<f64> {
        (0..=self.n).map(|m| self.w(self.n, m)).collect()
    }

    pub(crate) fn check_node(&self, j: usize, m: usize) -> Result<()> {
        if j > self.n || m > j {
            return Err(Error::Parameter(format!("node ({j}, {m}) is not in a {}-period lattice", self.n)));
        }
        Ok(())
    }

    /// Log-probabilities of the leaves `m..=m + n - j` reachable from layer `j`.
    pub fn leaf_log_weights(&self, j: usize) -> Vec<f64> {
        let r = self.n - j;
        let ln2 = std::f64::consts::LN_2;
        (0..=r)
            .map(|k| self.ln_fact[r] - self.ln_fact[k] - self.ln_fact[r - k] - r as f64 * ln2)
            .collect()
    }

    /// Certainty equivalent at `(j, m)` of a terminal cash-flow given by its leaf values.
    pub fn conditional_ce(&self, j: usize, m: usize, leaves: &[f64], aversion: Aversion) -> Result<f64> {
        self.check_node(j, m)?;
        let slice = &leaves[m..=m + self.n - j];
        let lw = self.leaf_log_weights(j);
        let out = match aversion {
            Aversion::Infinite => slice.iter().copied().fold(f64::INFINITY, f64::min),
            Aversion::Finite(a) if a == 0.0 => slice.iter().zip(&lw).map(|(v, l)| v * l.exp()).sum(),
            Aversion::Finite(a) => {
                if slice.iter().all(|v| *v == slice[0]) {
                    slice[0]
                } else {
                    let exps: Vec<f64> = slice.iter().map(|v| -a * v).collect();
                    -log_sum_exp_logw(&exps, &lw) / a
                }
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Overflow(format!("conditional certainty equivalent at node ({j}, {m})")))
        }
    }

    /// Tilted mean `E[D exp(-a F)] / E[exp(-a F)]` at `(j, m)` over the leaves.
    pub fn tilted_mean(&self, j: usize, m: usize, d: &[f64], f: &[f64], a: f64) -> Result<f64> {
        self.check_node(j, m)?;
        let r = self.n - j;
        let lw = self.leaf_log_weights(j);
        let logs: Vec<f64> = (0..=r).map(|k| lw[k] - a * f[m + k]).collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
        let total: f64 = probs.iter().sum();
        let out = (0..=r).map(|k| probs[k] * d[m + k]).sum::<f64>() / total;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Overflow(format!("tilted expectation at node ({j}, {m})")))
        }
    }
}

/// One-step certainty equivalent of a two-point law with equal weights.
#[inline]
pub(crate) fn ce2(aversion: Aversion, x0: f64, x1: f64) -> f64 {
    match aversion {
        Aversion::Infinite => x0.min(x1),
        Aversion::Finite(a) if a == 0.0 => 0.5 * (x0 + x1),
        Aversion::Finite(a) => {
            if x0 == x1 {
                x0
            } else {
                -log_mean_exp2(-a * x0, -a * x1) / a
            }
        }
    }
}
