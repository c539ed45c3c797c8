//! Output files of a run: a pretty JSON summary, the JSONL transcript and a
//! one-row CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;
use crate::runner::{RunOutcome, RunReport};

/// Name of the summary file.
pub const SUMMARY_FILE: &str = "summary.json";
/// Name of the transcript file.
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
/// Name of the single-run CSV file.
pub const RESULT_FILE: &str = "result.csv";

/// One flat CSV row of a run.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    /// Configuration name.
    pub config: String,
    /// Calibration variant.
    pub problem: String,
    /// Driver.
    pub dynamics: String,
    /// Seed.
    pub seed: u64,
    /// Horizon.
    pub rounds: usize,
    /// Target accuracy.
    pub epsilon: f64,
    /// Failure probability.
    pub delta: f64,
    /// Bin width.
    pub lambda: f64,
    /// Classes.
    pub k: usize,
    /// Audited loss of the output predictor.
    pub audited_loss: f64,
    /// Minmax reference.
    pub opt: f64,
    /// `opt + tolerance`.
    pub target: f64,
    /// Whether the audit met the target.
    pub pass: bool,
    /// Oracle calls.
    pub oracle_calls: u64,
    /// Samples drawn.
    pub samples: u64,
    /// Smallest audited loss over the iterates, when tracked.
    pub best_iterate_loss: Option<f64>,
    /// Largest per-component empirical adversary regret, when available.
    pub adversary_regret_empirical: Option<f64>,
    /// Largest per-component exact adversary regret.
    pub adversary_regret_exact: Option<f64>,
    /// Largest per-component exact weak regret of the learner.
    pub learner_weak_regret_exact: Option<f64>,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn max_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

impl From<&RunReport> for ResultRow {
    fn from(r: &RunReport) -> Self {
        let ledger = r.ledger.as_ref();
        Self {
            config: r.config.clone(),
            problem: label(&r.problem),
            dynamics: label(&r.dynamics),
            seed: r.seed,
            rounds: r.rounds,
            epsilon: r.epsilon,
            delta: r.delta,
            lambda: r.lambda,
            k: r.k,
            audited_loss: r.audited_loss,
            opt: r.opt,
            target: r.opt + r.tolerance,
            pass: r.pass,
            oracle_calls: r.oracle_calls,
            samples: r.samples,
            best_iterate_loss: r.best_iterate_loss,
            adversary_regret_empirical: ledger.and_then(|l| max_of(l.adversary_empirical.iter().flatten().copied())),
            adversary_regret_exact: ledger.and_then(|l| max_of(l.adversary_exact.iter().copied())),
            learner_weak_regret_exact: ledger.and_then(|l| max_of(l.learner_weak_exact.iter().flatten().copied())),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))
}

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("cannot write {}: {e}", path.display()))
}

/// Writes rows of any serializable record as CSV.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush().map_err(output_err(path))
}

/// Writes a pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(output_err(path))
}

/// Creates `dir` if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))
}

/// Writes the three output files of a run into `dir`.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_json(&dir.join(SUMMARY_FILE), &outcome.report)?;
    let path = dir.join(TRANSCRIPT_FILE);
    let mut w = create(&path)?;
    outcome
        .transcript
        .write_jsonl(&mut w)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    w.flush().map_err(output_err(&path))?;
    write_csv(&dir.join(RESULT_FILE), &[ResultRow::from(&outcome.report)])
}
