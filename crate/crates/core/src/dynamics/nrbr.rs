//! No-regret vs best-response dynamics.
//!
//! The lazy per-point learner leads: every round it emits its current
//! deterministic predictor, each component's oracle answers with an
//! objective (or declines), and the learner updates on the answered
//! objectives. Every iterate is kept as a candidate; one of them is
//! near-optimal, and [`super::find`] selects it.

use rand::Rng;

use super::transcript::{AdversaryRecord, DynamicsKind, LearnerPlay, RoundRecord, Transcript};
use crate::domain::DeterministicPredictor;
use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;
use crate::players::{lazy_update, AdversaryPlay, Counters, OracleAnswer, OracleConfig, OracleMode, PointLazyLearner, SampleBuffer};

/// Configuration of a no-regret-vs-best-response run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrbrConfig {
    /// Number of rounds `T`.
    pub horizon: usize,
    /// The adversary oracle.
    pub oracle: OracleConfig,
}

/// Result of a no-regret-vs-best-response run.
#[derive(Debug, Clone)]
pub struct NrbrOutcome {
    /// Every iterate `h^1, …, h^T`.
    pub candidates: Vec<DeterministicPredictor>,
    /// Full transcript (with the run's counters).
    pub transcript: Transcript,
}

/// Runs `cfg.horizon` rounds of no-regret vs best-response dynamics.
/// Oracle failures are reported with the zero-based round index.
pub fn run_nrbr<R: Rng + ?Sized>(problem: &MultiObjectiveProblem, cfg: &NrbrConfig, rng: &mut R) -> Result<NrbrOutcome> {
    let horizon = cfg.horizon;
    if horizon < 1 {
        return Err(Error::InvalidConfig("the horizon T must be at least 1".into()));
    }
    cfg.oracle.validate()?;
    if !problem.objectives().supports_row_visits() {
        return Err(Error::Unsupported("best-response dynamics on amplified objective sets (use nrnr)".into()));
    }
    let mut learner = PointLazyLearner::new(problem.signature(), problem.domain_size(), horizon)?;
    let mut counters = Counters::default();
    let buffer = match cfg.oracle.mode {
        OracleMode::NoisyMax { buffer, .. } => Some(SampleBuffer::draw(problem, buffer, rng, &mut counters)?),
        _ => None,
    };
    let b = problem.num_components();
    let mut records = Vec::with_capacity(horizon);
    let mut candidates = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let h = learner.predictor();
        let mut answers = Vec::with_capacity(b);
        for c in 0..b {
            let answer = cfg
                .oracle
                .query(problem, c, &h, buffer.as_ref(), rng, &mut counters)
                .map_err(|e| Error::OracleFailure { round: t, source: Box::new(e) })?;
            answers.push(answer);
        }
        let plays: Vec<AdversaryPlay> = answers
            .iter()
            .map(|a| match a {
                OracleAnswer::Objective { action, .. } => AdversaryPlay::Pure(*action),
                OracleAnswer::BelowThreshold => AdversaryPlay::Idle,
            })
            .collect();
        lazy_update(&mut learner, problem, &plays, &h)?;
        records.push(RoundRecord {
            round: t,
            learner: LearnerPlay::Predictor(h.clone()),
            adversary: answers
                .iter()
                .map(|a| match *a {
                    OracleAnswer::Objective { action, reported } => AdversaryRecord::Pure { action, reported },
                    OracleAnswer::BelowThreshold => AdversaryRecord::BelowThreshold,
                })
                .collect(),
            samples: Vec::new(),
            realized: answers
                .iter()
                .map(|a| match a {
                    OracleAnswer::Objective { reported, .. } => *reported,
                    OracleAnswer::BelowThreshold => 0.0,
                })
                .collect(),
        });
        candidates.push(h);
    }
    let transcript = Transcript { kind: DynamicsKind::Nrbr, seed: None, horizon, records, learner_class: None, counters };
    Ok(NrbrOutcome { candidates, transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{seeded_rng, TabularDistribution};
    use crate::domain::{GroupFamily, LevelGrid};
    use crate::objectives::BuildOptions;

    fn problem() -> MultiObjectiveProblem {
        let fam = GroupFamily::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let d = TabularDistribution::from_features(
            vec![0.2, 0.5, 0.3],
            fam,
            vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.7, 0.3]],
        )
        .unwrap();
        MultiObjectiveProblem::multicalibration(d, LevelGrid::new(0.25).unwrap(), BuildOptions::default()).unwrap()
    }

    #[test]
    fn exact_oracle_reaches_small_loss() {
        let p = problem();
        let cfg = NrbrConfig { horizon: 1110, oracle: OracleConfig::exact() };
        let out = run_nrbr(&p, &cfg, &mut seeded_rng(0)).unwrap();
        assert_eq!(out.transcript.counters.oracle_calls, 1110);
        let best = out.candidates.iter().map(|h| p.multi_objective_loss(h).1).fold(f64::MAX, f64::min);
        assert!(best <= 0.1, "{best}");
    }

    #[test]
    fn weak_oracle_idles_on_a_calibrated_start() {
        // With a single point and label law (1/2, 1/2), the uniform start is
        // already calibrated, so the weak oracle never answers.
        let fam = GroupFamily::whole_domain(1).unwrap();
        let d = TabularDistribution::from_features(vec![1.0], fam, vec![vec![0.5, 0.5]]).unwrap();
        let p = MultiObjectiveProblem::multicalibration(d, LevelGrid::new(0.25).unwrap(), BuildOptions::default()).unwrap();
        let cfg = NrbrConfig { horizon: 5, oracle: OracleConfig::weak(1.0, 0.1, 0.0) };
        let out = run_nrbr(&p, &cfg, &mut seeded_rng(0)).unwrap();
        assert!(out.transcript.records.iter().all(|r| r.adversary == vec![AdversaryRecord::BelowThreshold]));
        assert!(p.multi_objective_loss(&out.candidates[0]).1 <= 0.1);
    }

    #[test]
    fn oracle_failures_carry_the_round() {
        let p = problem();
        let cfg = NrbrConfig {
            horizon: 3,
            oracle: OracleConfig { mode: OracleMode::Weak { c: 1.0, epsilon: 0.1 }, delta: 0.05, reference: None },
        };
        // Validation catches the missing reference before any round runs.
        assert!(matches!(run_nrbr(&p, &cfg, &mut seeded_rng(0)), Err(Error::MissingReference(_))));
    }
}
