use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impactlab::runner::{self, Mode, Overrides, ScenarioConfig};
use impactlab::Error;

/// Utility-indifference market simulator.
#[derive(Parser)]
#[command(name = "impactlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Lévy paths and the efficient market along them.
    LevySim(Common),
    /// Tabulate the Markov value fields, optimal strategy and EIPU.
    MarkovFields(Common),
    /// Efficient price along factor paths in the Burgers shock-wave market.
    Shockwave(Common),
    /// Lattice dynamic-programming value and policy.
    DpValue(Common),
    /// Lattice value against the continuous-time limit for several sizes.
    Convergence(Common),
    /// Run the built-in invariant suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Time steps, lattice periods or field points, depending on the command.
    #[arg(long)]
    grid: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn error_record(e: &Error) -> String {
    let mut record = serde_json::json!({
        "status": "error",
        "kind": e.kind(),
        "message": e.to_string(),
    });
    if let Error::Config { field, .. } = e {
        record["field"] = serde_json::Value::String(field.clone());
    }
    record.to_string()
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("IMPACTLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config("IMPACTLAB_THREADS", format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config("IMPACTLAB_THREADS", e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::LevySim(c) => (Mode::LevySim, c),
        Command::MarkovFields(c) => (Mode::MarkovFields, c),
        Command::Shockwave(c) => (Mode::Shockwave, c),
        Command::DpValue(c) => (Mode::DpValue, c),
        Command::Convergence(c) => (Mode::Convergence, c),
        Command::Verify(c) => (Mode::Verify, c),
    };
    let result = configure_threads().and_then(|()| {
        let config = match &common.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::defaults(),
        };
        let overrides = Overrides { seed: common.seed, paths: common.paths, grid: common.grid, out: common.out.clone() };
        runner::run(&config, mode, &overrides)
    });
    match result {
        Ok(report) => {
            if !common.quiet {
                for line in &report.summary {
                    println!("{line}");
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            if report.failures > 0 {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "status": "error",
                        "kind": "verification",
                        "message": format!("{} check(s) failed", report.failures),
                    })
                );
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(if matches!(e, Error::Config { .. }) { 2 } else { 1 })
        }
    }
}
