//! Seed × horizon sweeps: one run per pair, executed on a worker pool, with
//! per-run rows and per-horizon summary statistics.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_csv, ResultRow};
use crate::runner::{execute_prepared, load_distribution, prepare, RunReport};

/// Name of the per-run CSV.
pub const RUNS_FILE: &str = "runs.csv";
/// Name of the per-horizon CSV.
pub const SWEEP_FILE: &str = "sweep.csv";

/// Parses `a..b` (half-open) or a comma-separated list of seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |why: &str| CliError::Input(format!("--seeds `{text}`: {why}"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad("range start is not an integer"))?;
        let b: u64 = b.trim().parse().map_err(|_| bad("range end is not an integer"))?;
        if a >= b {
            return Err(bad("empty range"));
        }
        return Ok((a..b).collect());
    }
    parse_list(text).map_err(|_| bad("expected `a..b` or a comma-separated list of integers"))
}

/// Parses a comma-separated list of integers.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, CliError> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Input(format!("`{text}` is not a comma-separated list of integers")))?;
    if values.is_empty() {
        return Err(CliError::Input("empty list".into()));
    }
    Ok(values)
}

/// Summary statistics of one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// Configuration name.
    pub config: String,
    /// Horizon.
    pub rounds: usize,
    /// Runs aggregated.
    pub runs: usize,
    /// Mean audited loss.
    pub mean: f64,
    /// Sample standard deviation of the audited loss (0 for one run).
    pub std: f64,
    /// Smallest audited loss.
    pub min: f64,
    /// Lower quartile.
    pub q25: f64,
    /// Median.
    pub median: f64,
    /// Upper quartile.
    pub q75: f64,
    /// Largest audited loss.
    pub max: f64,
    /// Fraction of runs meeting their target.
    pub pass_rate: f64,
    /// Mean oracle calls per run.
    pub mean_oracle_calls: f64,
    /// Mean samples per run.
    pub mean_samples: f64,
}

/// Aggregates the reports of one horizon.
pub fn summarize(config: &str, rounds: usize, reports: &[&RunReport]) -> SweepRow {
    let losses: Vec<f64> = reports.iter().map(|r| r.audited_loss).collect();
    let n = losses.len();
    let mut data = Data::new(losses.clone());
    let mean_of = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n as f64;
    SweepRow {
        config: config.to_string(),
        rounds,
        runs: n,
        mean: losses.iter().mean(),
        std: if n > 1 { losses.iter().std_dev() } else { 0.0 },
        min: Statistics::min(losses.iter()),
        q25: data.lower_quartile(),
        median: data.median(),
        q75: data.upper_quartile(),
        max: Statistics::max(losses.iter()),
        pass_rate: mean_of(&|r| if r.pass { 1.0 } else { 0.0 }),
        mean_oracle_calls: mean_of(&|r| r.oracle_calls as f64),
        mean_samples: mean_of(&|r| r.samples as f64),
    }
}

/// Runs every (horizon, seed) pair on `workers` threads and writes
/// [`RUNS_FILE`] and [`SWEEP_FILE`] into `out`. The regret ledger is skipped.
pub fn run_sweep(
    loaded: &LoadedConfig,
    seeds: &[u64],
    horizons: &[usize],
    workers: usize,
    out: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    let mut config = loaded.config.clone();
    config.ledger = false;
    let prepared = prepare((&config).into(), load_distribution(loaded)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {workers} workers: {e}")))?;
    let jobs: Vec<(usize, u64)> = horizons.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let reports = pool.install(|| {
        jobs.par_iter()
            .map(|&(t, seed)| {
                let mut c = config.clone();
                c.rounds = Some(t);
                execute_prepared(&loaded.name, &c, &prepared, seed).map(|o| o.report)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary: Vec<SweepRow> = horizons
        .iter()
        .map(|&t| {
            let group: Vec<&RunReport> = reports.iter().filter(|r| r.rounds == t).collect();
            summarize(&loaded.name, t, &group)
        })
        .collect();
    ensure_dir(out)?;
    let rows: Vec<ResultRow> = reports.iter().map(ResultRow::from).collect();
    write_csv(&out.join(RUNS_FILE), &rows)?;
    write_csv(&out.join(SWEEP_FILE), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs_parse() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn horizon_lists_parse() {
        assert_eq!(parse_list::<usize>("250,1000,4000").unwrap(), vec![250, 1000, 4000]);
        assert!(parse_list::<usize>("250,x").is_err());
    }
}
