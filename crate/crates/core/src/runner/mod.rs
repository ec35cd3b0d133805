//! Scenario-driven front end: validated configs, per-mode computations and
//! CSV output.

pub mod config;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{Mode, Overrides, ResolvedRun, ScenarioConfig, SCHEMA_VERSION};
pub use output::{emit_csv, real, Table};

use crate::dp::{convergence_study, markov_limit};
use crate::efficient::{allocation_value, efficient_path};
use crate::error::{Error, Result};
use crate::markov::shockwave::{crash_windows, shockwave_path};
use crate::paths::{simulate_batch, simulate_path, ShockSchedule};
use crate::levy::LevyModel;
use crate::numeric::mix_seed;
use config::Plan;

/// Files written by a run, one-line summaries and the number of failed checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub failures: usize,
}

fn int(x: usize) -> String {
    x.to_string()
}

fn write(out: &Path, name: &str, table: &Table, report: &mut RunReport) -> Result<()> {
    let path = out.join(name);
    emit_csv(&path, table)?;
    report.files.push(path);
    Ok(())
}

/// Resolves `config` for `mode` and executes it.
pub fn run(config: &ScenarioConfig, mode: Mode, overrides: &Overrides) -> Result<RunReport> {
    let resolved = config.resolve(mode, overrides)?;
    execute(&resolved)
}

pub fn execute(run: &ResolvedRun) -> Result<RunReport> {
    std::fs::create_dir_all(&run.out)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", run.out.display())))?;
    let out = run.out.as_path();
    let mut report = RunReport::default();
    match &run.plan {
        Plan::LevySim { scenario, seed, paths } => {
            let samples = simulate_batch(&scenario.model, &scenario.grid, &scenario.schedule, *seed, *paths)?;
            let records = samples.par_iter().map(|p| efficient_path(scenario, p)).collect::<Result<Vec<_>>>()?;
            let alloc = allocation_value(scenario)?;
            let mut rows = Table::new(&["path", "t", "X", "H_prime", "Y_star", "S_star", "risk_premium", "convexity"]);
            let mut summary = Table::new(&["path", "pnl", "terminal_wealth", "allocation_value"]);
            for (i, rec) in records.iter().enumerate() {
                for r in &rec.rows {
                    rows.push(vec![
                        int(i),
                        real(r.t),
                        real(r.x),
                        real(r.h_prime),
                        real(r.y_star),
                        real(r.s_star),
                        real(r.risk_premium),
                        real(r.convexity),
                    ]);
                }
                summary.push(vec![int(i), real(rec.pnl), real(rec.terminal_wealth), real(alloc)]);
            }
            write(out, "levy_paths.csv", &rows, &mut report)?;
            write(out, "levy_summary.csv", &summary, &mut report)?;
            report.summary.push(format!("levy-sim: {paths} path(s), allocation value {alloc}"));
        }
        Plan::MarkovFields { payoffs, t_values, w_values } => {
            let points: Vec<(f64, f64)> =
                t_values.iter().flat_map(|&t| w_values.iter().map(move |&w| (t, w))).collect();
            let rows = points
                .par_iter()
                .map(|&(t, w)| -> Result<Vec<String>> {
                    let y = payoffs.optimal_strategy(t, w)?;
                    Ok(vec![
                        real(t),
                        real(w),
                        real(payoffs.field_v(t, w)?),
                        real(payoffs.field_u(t, w)?),
                        real(payoffs.field_p(t, w, 0.0)?),
                        real(payoffs.field_q(t, w, 0.0)?),
                        real(y),
                        real(payoffs.eipu_at(t, w, y)?),
                        real(payoffs.convexity_at(t, w, y)?),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut table = Table::new(&["t", "w", "v", "u", "p", "q", "Y_star", "S_star", "convexity"]);
            rows.into_iter().for_each(|r| table.push(r));
            write(out, "markov_fields.csv", &table, &mut report)?;
            report.summary.push(format!("markov-fields: {} points", points.len()));
        }
        Plan::Shockwave { model, grid, seed, paths } => {
            let bm = LevyModel::Brownian { b: 0.0, sigma: 1.0 };
            let mut crashes = Table::new(&["path", "start_t", "cross_t", "end_t", "drop", "bound"]);
            for i in 0..*paths {
                let path_seed = if *paths == 1 { *seed } else { mix_seed(*seed, i as u64) };
                let p = simulate_path(&bm, grid, &ShockSchedule::default(), path_seed)?;
                let rows = shockwave_path(model, &p, grid)?;
                let mut table = Table::new(&["t", "W", "S_star", "Y_star", "wave_position"]);
                for r in &rows {
                    table.push(vec![real(r.t), real(r.w), real(r.s_star), real(r.y_star), real(r.wave_position)]);
                }
                for c in crash_windows(model, &rows) {
                    crashes.push(vec![
                        int(i),
                        real(rows[c.start].t),
                        real(rows[c.cross].t),
                        real(rows[c.end].t),
                        real(c.drop),
                        real(c.bound),
                    ]);
                }
                let name = if *paths == 1 { "shockwave.csv".to_string() } else { format!("shockwave_{i:04}.csv") };
                write(out, &name, &table, &mut report)?;
            }
            write(out, "crash_windows.csv", &crashes, &mut report)?;
            report.summary.push(format!("shockwave: {paths} path(s), {} crash window(s)", crashes.rows.len()));
        }
        Plan::DpValue { scenario } => {
            let dp = scenario.value_recursion()?;
            let mut value = Table::new(&["n", "V", "composed", "pi_G"]);
            value.push(vec![int(scenario.lattice.n()), real(dp.v0), real(dp.composed0), real(dp.pi_g0)]);
            let mut policy = Table::new(&["j", "m", "t", "w", "value", "policy"]);
            for (j, layer) in dp.policy.iter().enumerate() {
                for (m, y) in layer.iter().enumerate() {
                    policy.push(vec![
                        int(j),
                        int(m),
                        real(scenario.lattice.time(j)),
                        real(scenario.lattice.w(j, m)),
                        real(dp.value[j][m]),
                        real(*y),
                    ]);
                }
            }
            write(out, "dp_value.csv", &value, &mut report)?;
            write(out, "dp_policy.csv", &policy, &mut report)?;
            report.summary.push(format!("dp-value: n = {}, V = {}", scenario.lattice.n(), dp.v0));
        }
        Plan::Convergence { payoffs, admissible, n_list, limit } => {
            let limit = match limit {
                Some(l) => *l,
                None => markov_limit(payoffs)?,
            };
            let rows = convergence_study(payoffs, *admissible, n_list, limit)?;
            let mut table = Table::new(&["n", "V", "limit", "error"]);
            for r in &rows {
                table.push(vec![int(r.n), real(r.value), real(limit), real(r.error)]);
            }
            write(out, "convergence.csv", &table, &mut report)?;
            let last = rows.last().map(|r| r.error).unwrap_or(f64::NAN);
            report.summary.push(format!("convergence: limit {limit}, final error {last:e}"));
        }
        Plan::Verify { seed } => {
            let results = verify::run_suite(*seed);
            let mut table = Table::new(&["check", "passed", "detail"]);
            for r in &results {
                table.push(vec![r.name.to_string(), r.passed.to_string(), r.detail.clone()]);
                report.summary.push(format!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail));
            }
            report.failures = results.iter().filter(|r| !r.passed).count();
            write(out, "verify.csv", &table, &mut report)?;
            report.summary.push(format!("{} passed, {} failed", results.len() - report.failures, report.failures));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(p: &Path) -> String {
        std::fs::read_to_string(p).unwrap()
    }

    #[test]
    fn shockwave_mode_writes_one_row_per_grid_time() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { seed: Some(4), grid: Some(200), out: Some(dir.path().into()), paths: None };
        let report = run(&ScenarioConfig::defaults(), Mode::Shockwave, &o).unwrap();
        let text = read(&report.files[0]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,W,S_star,Y_star,wave_position"));
        assert_eq!(lines.count(), 201);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn trivial_dp_value_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { out: Some(dir.path().into()), grid: Some(4), ..Default::default() };
        let report = run(&ScenarioConfig::defaults(), Mode::DpValue, &o).unwrap();
        let text = read(&dir.path().join("dp_value.csv"));
        assert_eq!(text, "n,V,composed,pi_G\n4,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0\n");
        assert_eq!(report.files.len(), 2);
    }

    #[test]
    fn stochastic_modes_are_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for mode in [Mode::LevySim, Mode::Shockwave] {
            let mk = |d: &Path| Overrides { seed: Some(12), paths: Some(3), grid: Some(50), out: Some(d.into()) };
            let ra = run(&ScenarioConfig::defaults(), mode, &mk(a.path())).unwrap();
            let rb = run(&ScenarioConfig::defaults(), mode, &mk(b.path())).unwrap();
            for (fa, fb) in ra.files.iter().zip(&rb.files) {
                assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
            }
        }
    }

    #[test]
    fn markov_and_convergence_modes() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { out: Some(dir.path().into()), grid: Some(5), ..Default::default() };
        run(&ScenarioConfig::defaults(), Mode::MarkovFields, &o).unwrap();
        assert_eq!(read(&dir.path().join("markov_fields.csv")).lines().count(), 1 + 4 * 5);
        let mut cfg = ScenarioConfig::defaults();
        cfg.convergence.n_list = vec![2, 8];
        run(&cfg, Mode::Convergence, &o).unwrap();
        assert_eq!(read(&dir.path().join("convergence.csv")).lines().count(), 3);
    }
}
