//! Burgers shock wave: aggregated terminal `(g+h)(w) = w - log cosh(a(w - w_c))/a + b`
//! with `g = 0`, `S = μ - σW_1`. The gradient field is the travelling front
//! `u(t,w) = 1 - tanh(a(w - w_c) - a²(1-t))` and the EIPU crashes when the
//! factor crosses it.

use serde::{Deserialize, Serialize};

use super::{MarkovPayoffs, Payoff};
use crate::error::{Error, Result};
use crate::indifference::AgentPair;
use crate::paths::{PathGrid, PathSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockWaveModel {
    pub mu: f64,
    pub sigma: f64,
    pub w_c: f64,
    #[serde(default)]
    pub offset: f64,
    pub agents: AgentPair,
}

/// One row of a shock-wave path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockRow {
    pub t: f64,
    pub w: f64,
    pub s_star: f64,
    pub y_star: f64,
    /// Steepest position of the front in `-W` coordinates: `-w_c - a(1-t)`.
    pub wave_position: f64,
}

/// Segment of a path that traverses the steep band `|W - a(1-t) - w_c| < 1/a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrashWindow {
    pub start: usize,
    pub cross: usize,
    pub end: usize,
    /// `S*` at the start of the window minus `S*` at its end.
    pub drop: f64,
    /// `σ a (1 - t) tanh(1)` at the crossing.
    pub bound: f64,
}

impl ShockWaveModel {
    /// Model with the given aggregate aversion `a = cγ/(c+γ)`, split evenly (`c = γ = 2a`).
    pub fn with_aggregate(mu: f64, sigma: f64, a: f64, w_c: f64) -> Result<Self> {
        let m = ShockWaveModel { mu, sigma, w_c, offset: 0.0, agents: AgentPair::new(2.0 * a, 2.0 * a)? };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.agents.validate()?;
        if !(self.sigma > 0.0) {
            return Err(Error::Parameter("shock-wave model requires sigma > 0".into()));
        }
        if !(self.a() > 0.0) {
            return Err(Error::Parameter("shock-wave model requires cγ/(c+γ) > 0".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.agents.aggregate()
    }

    pub fn payoffs(&self) -> Result<MarkovPayoffs> {
        self.validate()?;
        MarkovPayoffs::new(
            Payoff::linear(self.mu, -self.sigma),
            Payoff::zero(),
            Payoff::LogCoshWave { a: self.a(), center: self.w_c, offset: self.offset },
            self.agents,
        )
    }

    fn front(&self, t: f64, w: f64) -> f64 {
        let a = self.a();
        a * (w - self.w_c) - a * a * (1.0 - t)
    }

    /// Closed-form gradient field.
    pub fn u(&self, t: f64, w: f64) -> f64 {
        1.0 - self.front(t, w).tanh()
    }

    pub fn y_star(&self, t: f64, w: f64) -> f64 {
        self.agents.demander_share() * self.u(t, w) / self.sigma
    }

    pub fn s_star(&self, t: f64, w: f64) -> f64 {
        self.mu - self.sigma * w + self.sigma * (1.0 - t) * self.a() * self.u(t, w)
    }

    pub fn wave_position(&self, t: f64) -> f64 {
        -self.w_c - self.a() * (1.0 - t)
    }

    /// Burgers residual `u_t + u_ww/2 - a u u_w` by central differences.
    pub fn burgers_residual(&self, t: f64, w: f64, h: f64) -> f64 {
        let u_t = (self.u(t + h, w) - self.u(t - h, w)) / (2.0 * h);
        let u_w = (self.u(t, w + h) - self.u(t, w - h)) / (2.0 * h);
        let u_ww = (self.u(t, w + h) - 2.0 * self.u(t, w) + self.u(t, w - h)) / (h * h);
        u_t + 0.5 * u_ww - self.a() * self.u(t, w) * u_w
    }
}

/// Efficient price path when the factor follows `path.x` (a standard Brownian path).
pub fn shockwave_path(model: &ShockWaveModel, path: &PathSample, grid: &PathGrid) -> Result<Vec<ShockRow>> {
    model.validate()?;
    if path.x.len() != grid.n_steps + 1 {
        return Err(Error::Parameter("path length does not match grid".into()));
    }
    Ok(path
        .x
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let t = grid.time(i);
            ShockRow {
                t,
                w,
                s_star: model.s_star(t, w),
                y_star: model.y_star(t, w),
                wave_position: model.wave_position(t),
            }
        })
        .collect())
}

/// Crossings of the front from below, each with the surrounding traversal
/// of the band `|ξ| < 1/a`, `ξ = W - a(1-t) - w_c`. Crossings whose band
/// traversal is not completed before maturity are skipped.
pub fn crash_windows(model: &ShockWaveModel, rows: &[ShockRow]) -> Vec<CrashWindow> {
    let a = model.a();
    let xi: Vec<f64> = rows.iter().map(|r| r.w - a * (1.0 - r.t) - model.w_c).collect();
    let mut out = Vec::new();
    for k in 0..xi.len().saturating_sub(1) {
        if !(xi[k] < 0.0 && xi[k + 1] >= 0.0) {
            continue;
        }
        let start = (0..=k).rev().find(|&i| xi[i] <= -1.0 / a);
        let end = (k + 1..xi.len()).find(|&i| xi[i] >= 1.0 / a);
        if let (Some(start), Some(end)) = (start, end) {
            out.push(CrashWindow {
                start,
                cross: k,
                end,
                drop: rows[start].s_star - rows[end].s_star,
                bound: model.sigma * a * (1.0 - rows[k].t) * 1f64.tanh(),
            });
        }
    }
    out
}
