//! Post-hoc selection of a near-optimal iterate.
//!
//! In samples mode, one fresh batch of `N = ⌈8 ε⁻² ln(4T|𝒢|/δ)⌉` samples
//! per distribution scores every candidate by its empirical maximum loss.
//! In oracle mode, one oracle call per candidate and component reports the
//! candidate's worst loss. Either way the argmin (first on ties) wins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action_count;
use super::payoff::{action_payoffs, WeightedAtoms};
use crate::domain::DeterministicPredictor;
use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;
use crate::players::oracle::aggregate;
use crate::players::{Counters, OracleAnswer, OracleConfig, OracleMode, SampleBuffer};

/// How candidates are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FindMode {
    /// Empirical maxima on one fresh sample batch.
    Samples,
    /// One oracle call per candidate and component.
    Oracle(OracleConfig),
}

/// The selected candidate with its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindOutcome {
    /// Index of the selected candidate.
    pub index: usize,
    /// Its score (empirical or reported maximum loss).
    pub score: f64,
    /// Samples drawn per distribution (samples mode).
    pub samples_per_distribution: usize,
}

/// Find's sample size `⌈8 ε⁻² ln(4T|𝒢|/δ)⌉`.
pub fn find_sample_size(epsilon: f64, delta: f64, candidates: usize, num_actions: usize) -> usize {
    (8.0 / (epsilon * epsilon) * (4.0 * candidates as f64 * num_actions as f64 / delta).ln()).ceil().max(1.0) as usize
}

/// Selects a candidate with (estimated) smallest maximum loss.
pub fn find<R: Rng + ?Sized>(
    candidates: &[DeterministicPredictor],
    problem: &MultiObjectiveProblem,
    epsilon: f64,
    delta: f64,
    mode: FindMode,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<FindOutcome> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("find needs epsilon > 0 and delta in (0, 1), got {epsilon}, {delta}")));
    }
    let b = problem.num_components();
    let mut best: Option<(usize, f64)> = None;
    let mut consider = |t: usize, score: f64| {
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((t, score));
        }
    };
    let mut samples_per_distribution = 0;
    match mode {
        FindMode::Samples => {
            let n = find_sample_size(epsilon, delta, candidates.len(), action_count(problem));
            samples_per_distribution = n;
            let atoms: Vec<WeightedAtoms> =
                problem.distributions().iter().map(|d| aggregate(&d.sample_n(n, rng))).collect();
            counters.samples += (n * problem.distributions().len()) as u64;
            for (t, h) in candidates.iter().enumerate() {
                problem.check_predictor(h)?;
                let payoffs = action_payoffs(problem, h, &atoms);
                let score = (0..b)
                    .map(|c| payoffs[c].argmax_in(0..problem.num_actions(c)).1)
                    .fold(f64::NEG_INFINITY, f64::max);
                consider(t, score);
            }
        }
        FindMode::Oracle(cfg) => {
            cfg.validate()?;
            let buffer = match cfg.mode {
                OracleMode::NoisyMax { buffer, .. } => Some(SampleBuffer::draw(problem, buffer, rng, counters)?),
                _ => None,
            };
            for (t, h) in candidates.iter().enumerate() {
                let mut score = f64::NEG_INFINITY;
                for c in 0..b {
                    let reported = match cfg.query(problem, c, h, buffer.as_ref(), rng, counters)? {
                        OracleAnswer::Objective { reported, .. } => reported,
                        OracleAnswer::BelowThreshold => cfg.reference.unwrap_or(0.0),
                    };
                    score = score.max(reported);
                }
                consider(t, score);
            }
        }
    }
    let (index, score) = best.expect("nonempty candidates");
    Ok(FindOutcome { index, score, samples_per_distribution })
}
