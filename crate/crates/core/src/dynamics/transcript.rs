//! Per-round records of a dynamics run.
//!
//! A transcript keeps every learner play, every adversary play and every
//! sample drawn by the driver, so regrets can be recomputed after the fact
//! (empirically from the recorded samples, or exactly from the tabular
//! law). The structured-text export writes one compact record per round:
//! mixtures are summarized by their heaviest actions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{DeterministicPredictor, Hypothesis, Sample, Signature};
use crate::error::Result;
use crate::players::{AdversaryPlay, Counters};

/// Which driver produced a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// No-regret vs no-regret.
    Nrnr,
    /// No-regret vs best response.
    Nrbr,
}

impl std::fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DynamicsKind::Nrnr => "nrnr",
            DynamicsKind::Nrbr => "nrbr",
        })
    }
}

/// The learner's play in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerPlay {
    /// A deterministic predictor.
    Predictor(DeterministicPredictor),
    /// Mixture weights over the transcript's explicit learner class.
    Mixture(Vec<f64>),
}

/// One component adversary's play in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryRecord {
    /// Hedge mixture over the component's actions.
    Mixed(Vec<f64>),
    /// An oracle's answer with the loss it reported.
    Pure {
        /// Component action index.
        action: usize,
        /// Loss reported by the oracle.
        reported: f64,
    },
    /// The oracle found no objective above its threshold.
    BelowThreshold,
}

impl AdversaryRecord {
    /// Borrowed view as a play.
    pub fn as_play(&self) -> AdversaryPlay<'_> {
        match self {
            AdversaryRecord::Mixed(q) => AdversaryPlay::Mixed(q),
            AdversaryRecord::Pure { action, .. } => AdversaryPlay::Pure(*action),
            AdversaryRecord::BelowThreshold => AdversaryPlay::Idle,
        }
    }
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Zero-based round index.
    pub round: usize,
    /// The learner's play.
    pub learner: LearnerPlay,
    /// One adversary play per component.
    pub adversary: Vec<AdversaryRecord>,
    /// Samples drawn by the driver this round, one per distribution (empty
    /// when the adversary is an oracle that samples internally).
    pub samples: Vec<Sample>,
    /// Realized adversary payoff per component: the mixture's payoff on
    /// this round's samples, or the oracle's reported loss.
    pub realized: Vec<f64>,
}

/// The full history of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    /// Driver.
    pub kind: DynamicsKind,
    /// Seed of the run, when the caller supplied one.
    pub seed: Option<u64>,
    /// Configured horizon `T`.
    pub horizon: usize,
    /// Per-round records, in order.
    pub records: Vec<RoundRecord>,
    /// Explicit learner class when the learner plays mixtures.
    pub learner_class: Option<Vec<DeterministicPredictor>>,
    /// Oracle-call and sample counters of the run.
    pub counters: Counters,
}

/// A borrowed weighted view of one round's learner play.
#[derive(Debug, Clone)]
pub struct PlayView<'a> {
    members: Vec<(f64, &'a DeterministicPredictor)>,
}

impl Hypothesis for PlayView<'_> {
    fn signature(&self) -> Signature {
        self.members[0].1.signature()
    }
    fn domain_size(&self) -> usize {
        self.members[0].1.domain_size()
    }
    fn weighted_members(&self) -> Vec<(f64, &DeterministicPredictor)> {
        self.members.clone()
    }
}

/// Weighted view of a play; mixture plays index into `class`.
pub(crate) fn play_view<'a>(play: &'a LearnerPlay, class: Option<&'a [DeterministicPredictor]>) -> PlayView<'a> {
    match play {
        LearnerPlay::Predictor(h) => PlayView { members: vec![(1.0, h)] },
        LearnerPlay::Mixture(w) => {
            let class = class.expect("mixture plays come with a learner class");
            PlayView { members: w.iter().copied().zip(class.iter()).filter(|(p, _)| *p > 0.0).collect() }
        }
    }
}

#[derive(Serialize)]
struct CompactRecord<'a> {
    round: usize,
    learner: CompactLearner<'a>,
    adversary: Vec<CompactAdversary>,
    samples: &'a [Sample],
    realized: &'a [f64],
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum CompactLearner<'a> {
    Predictor(&'a DeterministicPredictor),
    Mixture { top: Vec<(usize, f64)> },
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum CompactAdversary {
    Mixed { top: Vec<(usize, f64)> },
    Pure { action: usize, reported: f64 },
    BelowThreshold,
}

/// Number of heaviest actions written per mixture in the compact export.
const TOP_ENTRIES: usize = 5;

fn top_entries(q: &[f64]) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    idx.into_iter().take(TOP_ENTRIES).map(|a| (a, q[a])).collect()
}

impl Transcript {
    /// Number of recorded rounds.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when no round was recorded.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The learner's play in round `t` as a hypothesis.
    pub fn learner_view(&self, t: usize) -> PlayView<'_> {
        play_view(&self.records[t].learner, self.learner_class.as_deref())
    }

    /// Deterministic iterates in play order (empty for mixture plays).
    pub fn iterates(&self) -> Vec<&DeterministicPredictor> {
        self.records
            .iter()
            .filter_map(|r| match &r.learner {
                LearnerPlay::Predictor(h) => Some(h),
                LearnerPlay::Mixture(_) => None,
            })
            .collect()
    }

    /// Writes one compact JSON record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let record = CompactRecord {
                round: r.round,
                learner: match &r.learner {
                    LearnerPlay::Predictor(h) => CompactLearner::Predictor(h),
                    LearnerPlay::Mixture(w) => CompactLearner::Mixture { top: top_entries(w) },
                },
                adversary: r
                    .adversary
                    .iter()
                    .map(|a| match a {
                        AdversaryRecord::Mixed(q) => CompactAdversary::Mixed { top: top_entries(q) },
                        AdversaryRecord::Pure { action, reported } => {
                            CompactAdversary::Pure { action: *action, reported: *reported }
                        }
                        AdversaryRecord::BelowThreshold => CompactAdversary::BelowThreshold,
                    })
                    .collect(),
                samples: &r.samples,
                realized: &r.realized,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_entries_are_sorted_with_index_tiebreak() {
        assert_eq!(top_entries(&[0.1, 0.3, 0.3, 0.2]), vec![(1, 0.3), (2, 0.3), (3, 0.2), (0, 0.1)]);
    }
}
