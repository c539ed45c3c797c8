//! `multical` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multical::objectives::{MomentDegrees, ProblemKind};
use multical::TabularDistribution;
use multical_cli::audit_cmd::{load_predictor, run_audit};
use multical_cli::config::load_config;
use multical_cli::error::{CliError, EXIT_MISSED, EXIT_OK};
use multical_cli::output::write_run;
use multical_cli::runner::{execute, ProblemParams};
use multical_cli::selftest::run_selftest;
use multical_cli::sweep::{parse_list, parse_seeds, run_sweep};

#[derive(Debug, Parser)]
#[command(name = "multical", version, about = "Multicalibration via zero-sum game dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and audit its output exactly.
    Run {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Seed of the run's generator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon override.
        #[arg(long)]
        rounds: Option<usize>,
        /// Directory for summary.json, transcript.jsonl and result.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit a stored predictor against a stored distribution.
    Audit {
        /// Predictor file.
        #[arg(long)]
        predictor: PathBuf,
        /// Distribution file.
        #[arg(long)]
        distribution: PathBuf,
        /// Calibration variant: mc, agnostic, moment, conditional or competitive.
        #[arg(long, value_parser = parse_serde::<ProblemKind>)]
        problem: ProblemKind,
        /// Bin width.
        #[arg(long)]
        lambda: f64,
        /// Highest moment degree (moment audits).
        #[arg(long, default_value_t = 2)]
        r: u32,
        /// Calibrated moment degrees: even or all.
        #[arg(long, value_parser = parse_serde::<MomentDegrees>, default_value = "even")]
        moment_degrees: MomentDegrees,
        /// Exit with status 1 when the audited loss exceeds this value.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run a configuration over seeds and horizons.
    Sweep {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Seeds: `a..b` or a comma-separated list.
        #[arg(long, default_value = "0..20")]
        seeds: String,
        /// Comma-separated horizons.
        #[arg(long)]
        rounds: String,
        /// Worker threads.
        #[arg(long, env = "MULTICAL_WORKERS", default_value_t = 1)]
        parallel: usize,
        /// Directory for runs.csv and sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the library's structural self-checks.
    Selftest,
}

/// Parses a lower-case variant name through its serde representation.
fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, seed, rounds, out } => {
            let mut loaded = load_config(&config)?;
            if rounds.is_some() {
                loaded.config.rounds = rounds;
            }
            let outcome = execute(&loaded, seed)?;
            write_run(&out, &outcome)?;
            let r = &outcome.report;
            println!(
                "{} seed {} T={}: audited loss {:.6} (target {:.6}) {}",
                r.config,
                r.seed,
                r.rounds,
                r.audited_loss,
                r.opt + r.tolerance,
                if r.pass { "PASS" } else { "MISS" }
            );
            Ok(if r.pass { EXIT_OK } else { EXIT_MISSED })
        }
        Command::Audit { predictor, distribution, problem, lambda, r, moment_degrees, tolerance } => {
            let h = load_predictor(&predictor)?;
            let dist = TabularDistribution::from_path(&distribution)?;
            let params = ProblemParams { kind: problem, lambda, r, moment_degrees, k: None };
            let report = run_audit(params, dist, &h, tolerance)?;
            println!("{}", to_json(&report));
            Ok(if report.pass { EXIT_OK } else { EXIT_MISSED })
        }
        Command::Sweep { config, seeds, rounds, parallel, out } => {
            let loaded = load_config(&config)?;
            let seeds = parse_seeds(&seeds)?;
            let horizons = parse_list::<usize>(&rounds)?;
            let rows = run_sweep(&loaded, &seeds, &horizons, parallel, &out)?;
            for row in &rows {
                println!(
                    "T={:>7}  median {:.6}  mean {:.6}  max {:.6}  pass rate {:.2}",
                    row.rounds, row.median, row.mean, row.max, row.pass_rate
                );
            }
            Ok(EXIT_OK)
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_MISSED })
        }
    }
}

fn main() -> ExitCode {
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
