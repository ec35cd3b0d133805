//! Versioned TOML scenario configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dp::{AdmissibleSet, DpScenario};
use crate::efficient::LevyScenario;
use crate::error::{Error, Result};
use crate::indifference::{AgentPair, Aversion};
use crate::levy::LevyModel;
use crate::markov::quadratic::QuadraticModel;
use crate::markov::shockwave::ShockWaveModel;
use crate::markov::{MarkovPayoffs, Payoff};
use crate::paths::{PathGrid, ShockSchedule};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest lattice accepted for the backward induction.
pub const MAX_LATTICE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LevySim,
    MarkovFields,
    Shockwave,
    DpValue,
    Convergence,
    Verify,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::LevySim => "levy-sim",
            Mode::MarkovFields => "markov-fields",
            Mode::Shockwave => "shockwave",
            Mode::DpValue => "dp-value",
            Mode::Convergence => "convergence",
            Mode::Verify => "verify",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Mode::LevySim | Mode::Shockwave | Mode::Verify)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub levy: LevySection,
    #[serde(default)]
    pub markov: MarkovSection,
    #[serde(default)]
    pub shockwave: ShockwaveSection,
    #[serde(default)]
    pub dp: DpSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

impl ScenarioConfig {
    /// Configuration with every section at its default.
    pub fn defaults() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            mode: None,
            seed: None,
            paths: None,
            grid: None,
            out: None,
            levy: LevySection::default(),
            markov: MarkovSection::default(),
            shockwave: ShockwaveSection::default(),
            dp: DpSection::default(),
            convergence: ConvergenceSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." { "<document>".to_string() } else { field };
            Error::config(field, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn unit_aversion() -> Aversion {
    Aversion::Finite(1.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    #[serde(default = "default_levy_model")]
    pub model: LevyModel,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "unit_aversion")]
    pub c: Aversion,
    /// Supplier holding `a` in `G = aS`.
    #[serde(default)]
    pub a: f64,
    /// Cash part of the demander endowment.
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub initial_value: f64,
    #[serde(default)]
    pub shocks: Vec<(f64, f64)>,
}

fn default_levy_model() -> LevyModel {
    LevyModel::Brownian { b: 0.1, sigma: 1.0 }
}

impl Default for LevySection {
    fn default() -> Self {
        LevySection {
            model: default_levy_model(),
            gamma: 1.0,
            c: unit_aversion(),
            a: 0.0,
            h: 0.0,
            initial_value: 0.0,
            shocks: Vec::new(),
        }
    }
}

/// Terminal market of a Brownian factor.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarketSpec {
    Quadratic { g_load: f64, mu: f64, sigma: f64, a_lin: f64, b_quad: f64 },
    ShockWave { mu: f64, sigma: f64, w_c: f64, #[serde(default)] offset: f64 },
    Custom { s: Payoff, g: Payoff, h: Payoff },
}

impl MarketSpec {
    fn trivial() -> Self {
        MarketSpec::Custom { s: Payoff::linear(0.0, 1.0), g: Payoff::zero(), h: Payoff::zero() }
    }

    fn unit_quadratic() -> Self {
        MarketSpec::Quadratic { g_load: 0.0, mu: 0.0, sigma: 1.0, a_lin: 1.0, b_quad: 0.0 }
    }

    /// Markov payoffs for the market; errors name `section.market`.
    pub fn payoffs(&self, agents: AgentPair, section: &str) -> Result<MarkovPayoffs> {
        let field = format!("{section}.market");
        let wrap = |e: Error| Error::config(field.clone(), e.to_string());
        match self {
            MarketSpec::Quadratic { g_load, mu, sigma, a_lin, b_quad } => QuadraticModel {
                g_load: *g_load,
                mu: *mu,
                sigma: *sigma,
                a_lin: *a_lin,
                b_quad: *b_quad,
                agents,
            }
            .payoffs()
            .map_err(wrap),
            MarketSpec::ShockWave { mu, sigma, w_c, offset } => {
                ShockWaveModel { mu: *mu, sigma: *sigma, w_c: *w_c, offset: *offset, agents }
                    .payoffs()
                    .map_err(wrap)
            }
            MarketSpec::Custom { s, g, h } => {
                MarkovPayoffs::new(s.clone(), g.clone(), h.clone(), agents).map_err(wrap)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    #[serde(default = "MarketSpec::unit_quadratic")]
    pub market: MarketSpec,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "unit_aversion")]
    pub c: Aversion,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default = "default_w_min")]
    pub w_min: f64,
    #[serde(default = "default_w_max")]
    pub w_max: f64,
    #[serde(default = "default_w_points")]
    pub w_points: usize,
}

fn default_t_values() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75]
}

fn default_w_min() -> f64 {
    -3.0
}

fn default_w_max() -> f64 {
    3.0
}

fn default_w_points() -> usize {
    61
}

impl Default for MarkovSection {
    fn default() -> Self {
        MarkovSection {
            market: MarketSpec::unit_quadratic(),
            gamma: 1.0,
            c: unit_aversion(),
            t_values: default_t_values(),
            w_min: default_w_min(),
            w_max: default_w_max(),
            w_points: default_w_points(),
        }
    }
}

/// Shock-wave scenario; `a` is the aggregate aversion, split as `c = γ = 2a`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockwaveSection {
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "default_wave_a")]
    pub a: f64,
    #[serde(default = "default_w_c")]
    pub w_c: f64,
}

fn default_wave_a() -> f64 {
    2.0
}

fn default_w_c() -> f64 {
    -0.6
}

impl Default for ShockwaveSection {
    fn default() -> Self {
        ShockwaveSection { mu: 0.0, sigma: 1.0, a: default_wave_a(), w_c: default_w_c() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    #[serde(default = "MarketSpec::trivial")]
    pub market: MarketSpec,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "unit_aversion")]
    pub c: Aversion,
    #[serde(default = "default_dp_n")]
    pub n: usize,
    #[serde(default = "default_admissible")]
    pub admissible: AdmissibleSet,
}

fn default_dp_n() -> usize {
    16
}

fn default_admissible() -> AdmissibleSet {
    AdmissibleSet { lo: -1.0, hi: 1.0, delta: 1e-3, refine: true }
}

impl Default for DpSection {
    fn default() -> Self {
        DpSection {
            market: MarketSpec::trivial(),
            gamma: 1.0,
            c: unit_aversion(),
            n: default_dp_n(),
            admissible: default_admissible(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default = "MarketSpec::unit_quadratic")]
    pub market: MarketSpec,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "unit_aversion")]
    pub c: Aversion,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_admissible")]
    pub admissible: AdmissibleSet,
    /// Continuous-time limit; computed from the Markov value fields when absent.
    #[serde(default)]
    pub limit: Option<f64>,
}

fn default_n_list() -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            market: MarketSpec::unit_quadratic(),
            gamma: 1.0,
            c: unit_aversion(),
            n_list: default_n_list(),
            admissible: default_admissible(),
            limit: None,
        }
    }
}

/// Fully validated work item for one run.
#[derive(Debug, Clone)]
pub enum Plan {
    LevySim { scenario: LevyScenario, seed: u64, paths: usize },
    MarkovFields { payoffs: MarkovPayoffs, t_values: Vec<f64>, w_values: Vec<f64> },
    Shockwave { model: ShockWaveModel, grid: PathGrid, seed: u64, paths: usize },
    DpValue { scenario: Box<DpScenario> },
    Convergence { payoffs: MarkovPayoffs, admissible: AdmissibleSet, n_list: Vec<usize>, limit: Option<f64> },
    Verify { seed: u64 },
}

/// A validated run: output directory plus the work item.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub mode: Mode,
    pub out: PathBuf,
    pub plan: Plan,
}

fn agents(section: &str, gamma: f64, c: Aversion, strict_supplier: bool) -> Result<AgentPair> {
    if !(gamma.is_finite() && gamma >= 0.0) || (strict_supplier && gamma <= 0.0) {
        let bound = if strict_supplier { "> 0" } else { ">= 0" };
        return Err(Error::config(format!("{section}.gamma"), format!("must be finite and {bound}, got {gamma}")));
    }
    AgentPair::new(gamma, c).map_err(|e| Error::config(format!("{section}.c"), e.to_string()))
}

fn admissible(section: &str, set: &AdmissibleSet) -> Result<()> {
    let field = |name: &str| format!("{section}.admissible.{name}");
    if !(set.lo.is_finite() && set.lo <= 0.0) {
        return Err(Error::config(field("lo"), format!("must be finite and <= 0, got {}", set.lo)));
    }
    if !(set.hi.is_finite() && set.hi >= 0.0) {
        return Err(Error::config(field("hi"), format!("must be finite and >= 0, got {}", set.hi)));
    }
    set.validate().map_err(|e| Error::config(field("delta"), e.to_string()))
}

fn positive(field: &str, value: usize) -> Result<usize> {
    if value == 0 {
        return Err(Error::config(field, "must be at least 1"));
    }
    Ok(value)
}

impl ScenarioConfig {
    /// Applies overrides and checks every parameter reachable from `mode`
    /// before any computation.
    pub fn resolve(&self, mode: Mode, overrides: &Overrides) -> Result<ResolvedRun> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if let Some(m) = self.mode {
            if m != mode {
                return Err(Error::config("mode", format!("config is for `{}`, command is `{}`", m.name(), mode.name())));
            }
        }
        let seed = overrides.seed.or(self.seed);
        let paths = overrides.paths.or(self.paths);
        let grid = overrides.grid.or(self.grid);
        let out = overrides.out.clone().or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        let need_seed = || seed.ok_or_else(|| Error::config("seed", format!("`{}` is stochastic and needs a seed", mode.name())));
        if let Some(p) = paths {
            positive("paths", p)?;
        }
        if let Some(g) = grid {
            positive("grid", g)?;
        }
        let plan = match mode {
            Mode::LevySim => {
                let seed = need_seed()?;
                let s = &self.levy;
                s.model.validate().map_err(|e| Error::config("levy.model", e.to_string()))?;
                let agents = agents("levy", s.gamma, s.c, true)?;
                if !s.a.is_finite() {
                    return Err(Error::config("levy.a", "must be finite"));
                }
                s.model
                    .kappa(s.gamma * s.a)
                    .map_err(|e| Error::config("levy.a", format!("γa outside the cumulant domain: {e}")))?;
                let grid = PathGrid::new(grid.unwrap_or(250)).map_err(|e| Error::config("grid", e.to_string()))?;
                let schedule = ShockSchedule { h: s.h, initial_value: s.initial_value, shocks: s.shocks.clone() };
                schedule.validate().map_err(|e| Error::config("levy.shocks", e.to_string()))?;
                schedule.snapped(&grid).map_err(|e| Error::config("levy.shocks", e.to_string()))?;
                let scenario = LevyScenario::new(s.model, agents, s.a, schedule, grid).map_err(|e| {
                    let field = if s.shocks.is_empty() { "levy.initial_value" } else { "levy.shocks" };
                    Error::config(field, e.to_string())
                })?;
                Plan::LevySim { scenario, seed, paths: paths.unwrap_or(1) }
            }
            Mode::MarkovFields => {
                let s = &self.markov;
                let agents = agents("markov", s.gamma, s.c, false)?;
                let payoffs = s.market.payoffs(agents, "markov")?;
                if let Some(t) = s.t_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                    return Err(Error::config("markov.t_values", format!("times must lie in [0, 1], got {t}")));
                }
                if !(s.w_min.is_finite() && s.w_max.is_finite() && s.w_min <= s.w_max) {
                    return Err(Error::config("markov.w_max", "need finite w_min <= w_max"));
                }
                let n = positive("markov.w_points", grid.unwrap_or(s.w_points))?;
                let w_values = if n == 1 {
                    vec![s.w_min]
                } else {
                    (0..n).map(|i| s.w_min + (s.w_max - s.w_min) * i as f64 / (n - 1) as f64).collect()
                };
                Plan::MarkovFields { payoffs, t_values: s.t_values.clone(), w_values }
            }
            Mode::Shockwave => {
                let seed = need_seed()?;
                let s = &self.shockwave;
                if !(s.sigma > 0.0 && s.sigma.is_finite()) {
                    return Err(Error::config("shockwave.sigma", format!("must be > 0, got {}", s.sigma)));
                }
                if !(s.a > 0.0 && s.a.is_finite()) {
                    return Err(Error::config("shockwave.a", format!("must be > 0, got {}", s.a)));
                }
                for (name, v) in [("shockwave.mu", s.mu), ("shockwave.w_c", s.w_c)] {
                    if !v.is_finite() {
                        return Err(Error::config(name, "must be finite"));
                    }
                }
                let model = ShockWaveModel::with_aggregate(s.mu, s.sigma, s.a, s.w_c)
                    .map_err(|e| Error::config("shockwave", e.to_string()))?;
                let grid = PathGrid::new(grid.unwrap_or(1000)).map_err(|e| Error::config("grid", e.to_string()))?;
                Plan::Shockwave { model, grid, seed, paths: paths.unwrap_or(1) }
            }
            Mode::DpValue => {
                let s = &self.dp;
                let agents = agents("dp", s.gamma, s.c, false)?;
                let payoffs = s.market.payoffs(agents, "dp")?;
                admissible("dp", &s.admissible)?;
                let n = positive("dp.n", grid.unwrap_or(s.n))?;
                if n > MAX_LATTICE {
                    return Err(Error::config("dp.n", format!("lattice size {n} exceeds {MAX_LATTICE}")));
                }
                let scenario =
                    DpScenario::new(n, payoffs, s.admissible).map_err(|e| Error::config("dp.market", e.to_string()))?;
                Plan::DpValue { scenario: Box::new(scenario) }
            }
            Mode::Convergence => {
                let s = &self.convergence;
                let agents = agents("convergence", s.gamma, s.c, false)?;
                let payoffs = s.market.payoffs(agents, "convergence")?;
                admissible("convergence", &s.admissible)?;
                if s.n_list.is_empty() {
                    return Err(Error::config("convergence.n_list", "must not be empty"));
                }
                if let Some(&n) = s.n_list.iter().find(|&&n| n == 0 || n > MAX_LATTICE) {
                    return Err(Error::config("convergence.n_list", format!("lattice sizes must be in 1..={MAX_LATTICE}, got {n}")));
                }
                if let Some(l) = s.limit {
                    if !l.is_finite() {
                        return Err(Error::config("convergence.limit", "must be finite"));
                    }
                }
                for &n in &s.n_list {
                    DpScenario::new(n, payoffs.clone(), s.admissible)
                        .map_err(|e| Error::config("convergence.market", e.to_string()))?;
                }
                Plan::Convergence { payoffs, admissible: s.admissible, n_list: s.n_list.clone(), limit: s.limit }
            }
            Mode::Verify => Plan::Verify { seed: seed.unwrap_or(0) },
        };
        Ok(ResolvedRun { mode, out, plan })
    }
}
