//! Seeded simulation of driver paths on a uniform grid over `[0, 1]`, plus
//! the deterministic signal-loading process `H'` with scheduled shocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numeric::mix_seed;

/// Uniform grid `tᵢ = i / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathGrid {
    pub n_steps: usize,
}

impl PathGrid {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Parameter("grid needs at least one step".into()));
        }
        Ok(PathGrid { n_steps })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Nearest grid index to `t`.
    pub fn snap(&self, t: f64) -> usize {
        (t * self.n_steps as f64).round() as usize
    }
}

/// Endowment `H = h + ∫ H'_t dX_t` with piecewise-constant, right-continuous `H'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ShockSchedule {
    /// Cash part `h`.
    #[serde(default)]
    pub h: f64,
    pub initial_value: f64,
    /// `(time, jump)` pairs with strictly increasing times in `(0, 1)`.
    #[serde(default)]
    pub shocks: Vec<(f64, f64)>,
}

impl ShockSchedule {
    pub fn constant(value: f64) -> Self {
        ShockSchedule { h: 0.0, initial_value: value, shocks: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.initial_value.is_finite() || !self.h.is_finite() {
            return Err(Error::Schedule("initial value and h must be finite".into()));
        }
        let mut last = 0.0;
        for &(t, jump) in &self.shocks {
            if !(t > 0.0 && t < 1.0) || !jump.is_finite() {
                return Err(Error::Schedule(format!("shock ({t}, {jump}) must have time in (0,1)")));
            }
            if t <= last {
                return Err(Error::Schedule("shock times must be strictly increasing".into()));
            }
            last = t;
        }
        Ok(())
    }

    /// Grid indices of the shocks after snapping; errors on collisions.
    pub fn snapped(&self, grid: &PathGrid) -> Result<Vec<(usize, f64)>> {
        self.validate()?;
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.shocks.len());
        for &(t, jump) in &self.shocks {
            let idx = grid.snap(t);
            if idx == 0 || idx >= grid.n_steps {
                return Err(Error::Schedule(format!(
                    "shock at t={t} snaps to the grid boundary (index {idx} of {})",
                    grid.n_steps
                )));
            }
            if out.last().is_some_and(|&(prev, _)| prev == idx) {
                return Err(Error::Schedule(format!(
                    "shock at t={t} collides with an earlier shock at grid index {idx}"
                )));
            }
            out.push((idx, jump));
        }
        Ok(out)
    }

    /// `H'` at every grid time.
    pub fn on_grid(&self, grid: &PathGrid) -> Result<Vec<f64>> {
        let snapped = self.snapped(grid)?;
        let mut values = Vec::with_capacity(grid.n_steps + 1);
        let mut level = self.initial_value;
        let mut next = snapped.iter().peekable();
        for i in 0..=grid.n_steps {
            while let Some(&&(idx, jump)) = next.peek() {
                if idx != i {
                    break;
                }
                level += jump;
                next.next();
            }
            values.push(level);
        }
        Ok(values)
    }
}

/// One simulated path on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub x: Vec<f64>,
    pub increments: Vec<f64>,
    pub h_prime: Vec<f64>,
}

/// Draws one increment of the driver over a step of length `dt`.
pub fn sample_increment<R: Rng + ?Sized>(model: &LevyModel, dt: f64, rng: &mut R) -> f64 {
    match *model {
        LevyModel::Brownian { b, sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            b * dt + sigma * dt.sqrt() * z
        }
        LevyModel::Gamma { alpha, beta } => Gamma::new(beta * dt, 1.0 / alpha)
            .expect("validated gamma parameters")
            .sample(rng),
        LevyModel::OneSidedStable { r, alpha_exp } => {
            (r * dt).powf(1.0 / alpha_exp) * standard_positive_stable(alpha_exp, rng)
        }
    }
}

/// Kanter's representation of the positive stable law with
/// `E[exp(-u S)] = exp(-u^α)`.
pub fn standard_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = std::f64::consts::PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin().powf(alpha / (1.0 - alpha)) * ((1.0 - alpha) * u).sin()
        / u.sin().powf(1.0 / (1.0 - alpha));
    (a / e).powf((1.0 - alpha) / alpha)
}

/// Simulates `X` on the grid with exact increment marginals.
pub fn simulate_path(
    model: &LevyModel,
    grid: &PathGrid,
    schedule: &ShockSchedule,
    seed: u64,
) -> Result<PathSample> {
    model.validate()?;
    let h_prime = schedule.on_grid(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = grid.dt();
    let increments: Vec<f64> =
        (0..grid.n_steps).map(|_| sample_increment(model, dt, &mut rng)).collect();
    let mut x = Vec::with_capacity(grid.n_steps + 1);
    x.push(0.0);
    let mut level = 0.0;
    for inc in &increments {
        level += inc;
        x.push(level);
    }
    Ok(PathSample { x, increments, h_prime })
}

/// Simulates `n_paths` paths; path `i` uses the seed `mix_seed(seed, i)` so
/// the result does not depend on scheduling.
pub fn simulate_batch(
    model: &LevyModel,
    grid: &PathGrid,
    schedule: &ShockSchedule,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<PathSample>> {
    model.validate()?;
    schedule.snapped(grid)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| simulate_path(model, grid, schedule, mix_seed(seed, i as u64)))
        .collect()
}

/// `X̃_t = X_t + (1 - t) E[X_1]` on the grid.
pub fn martingale_component(
    model: &LevyModel,
    path: &PathSample,
    grid: &PathGrid,
) -> Result<Vec<f64>> {
    let mean = model.mean()?;
    Ok(path
        .x
        .iter()
        .enumerate()
        .map(|(i, x)| x + (1.0 - grid.time(i)) * mean)
        .collect())
}
