//! Regret accounting over a transcript.
//!
//! Payoffs are recomputed from the recorded plays, either on the recorded
//! samples (empirical flavor) or on the tabular law (exact flavor).
//!
//! * Adversary standard regret: `max_a Σ_t P_t(a) − Σ_t ⟨q_t, P_t⟩`.
//! * Adversary weak regret: `T·V − Σ_t ⟨q_t, P_t⟩` with `V` the minmax
//!   reference.
//! * Learner standard regret: `Σ_t ⟨q_t, P_t⟩ − min_h Σ_t ⟨q_t, P_t(h)⟩`,
//!   the minimum taken over the explicit class, or point by point over the
//!   step-`1/r` simplex grid for deterministic learners.
//! * Learner weak regret: `Σ_t ⟨q_t, P_t⟩ − T·V`.

use serde::{Deserialize, Serialize};

use super::payoff::{action_payoffs, exact_atoms, mixed_payoff, sample_atoms, WeightedAtoms};
use super::transcript::{AdversaryRecord, LearnerPlay, Transcript};
use crate::domain::{DeterministicPredictor, Prediction};
use crate::error::{Error, Result};
use crate::objectives::{MultiObjectiveProblem, SparseLosses};
use crate::players::simplex_grid;

/// Whose regret to compute; the index is the component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    /// The learner of one component.
    Learner(usize),
    /// The adversary of one component.
    Adversary(usize),
}

/// Loss source of the regret computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretFlavor {
    /// Losses on the samples recorded in the transcript.
    Empirical,
    /// Expected losses under the tabular law.
    Exact,
}

/// Comparator of the regret computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    /// Best fixed action in hindsight.
    Standard,
    /// `T` times the minmax reference value.
    Weak,
}

/// Grid resolution of the learner's hindsight comparator.
pub const LEARNER_HINDSIGHT_RESOLUTION: usize = 20;

/// Largest `T · |X| · grid` product the learner hindsight search accepts.
const LEARNER_HINDSIGHT_CAP: u128 = 200_000_000;

fn round_atoms(transcript: &Transcript, problem: &MultiObjectiveProblem, t: usize, flavor: RegretFlavor, exact: &[WeightedAtoms]) -> Result<Vec<WeightedAtoms>> {
    match flavor {
        RegretFlavor::Exact => Ok(exact.to_vec()),
        RegretFlavor::Empirical => {
            let samples = &transcript.records[t].samples;
            if samples.len() != problem.distributions().len() {
                return Err(Error::Unsupported(
                    "empirical regret needs one recorded sample per distribution and round".into(),
                ));
            }
            Ok(sample_atoms(samples))
        }
    }
}

fn played_payoff(record: &AdversaryRecord, payoffs: &SparseLosses) -> f64 {
    match record {
        AdversaryRecord::Mixed(q) => mixed_payoff(payoffs, q),
        AdversaryRecord::Pure { action, .. } => payoffs.get(*action),
        AdversaryRecord::BelowThreshold => 0.0,
    }
}

/// Regret of one player over the transcript.
pub fn compute_regret(
    transcript: &Transcript,
    problem: &MultiObjectiveProblem,
    player: Player,
    flavor: RegretFlavor,
    kind: RegretKind,
    reference: Option<f64>,
) -> Result<f64> {
    let (Player::Learner(c) | Player::Adversary(c)) = player;
    if c >= problem.num_components() {
        return Err(Error::InvalidConfig(format!("component {c} out of range")));
    }
    let reference = match kind {
        RegretKind::Weak => Some(reference.ok_or(Error::MissingReference("weak regret"))?),
        RegretKind::Standard => None,
    };
    let exact = match flavor {
        RegretFlavor::Exact => exact_atoms(problem),
        RegretFlavor::Empirical => Vec::new(),
    };
    let rounds = transcript.len();
    let mut realized = 0.0;
    let mut cumulative = match (player, kind) {
        (Player::Adversary(_), RegretKind::Standard) => vec![0.0; problem.num_actions(c)],
        _ => Vec::new(),
    };
    for t in 0..rounds {
        let atoms = round_atoms(transcript, problem, t, flavor, &exact)?;
        let view = transcript.learner_view(t);
        let payoffs = action_payoffs(problem, &view, &atoms);
        realized += played_payoff(&transcript.records[t].adversary[c], &payoffs[c]);
        if !cumulative.is_empty() {
            for (a, v) in payoffs[c].entries() {
                cumulative[a] += v;
            }
        }
    }
    let t = rounds as f64;
    Ok(match (player, kind) {
        (Player::Adversary(_), RegretKind::Standard) => cumulative.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - realized,
        (Player::Adversary(_), RegretKind::Weak) => t * reference.expect("checked") - realized,
        (Player::Learner(_), RegretKind::Weak) => realized - t * reference.expect("checked"),
        (Player::Learner(_), RegretKind::Standard) => realized - learner_hindsight(transcript, problem, c, flavor, &exact)?,
    })
}

/// Smallest cumulative loss of a fixed learner play in hindsight.
fn learner_hindsight(
    transcript: &Transcript,
    problem: &MultiObjectiveProblem,
    c: usize,
    flavor: RegretFlavor,
    exact: &[WeightedAtoms],
) -> Result<f64> {
    if let Some(class) = &transcript.learner_class {
        let mut totals = vec![0.0; class.len()];
        for t in 0..transcript.len() {
            let atoms = round_atoms(transcript, problem, t, flavor, exact)?;
            for (m, member) in class.iter().enumerate() {
                let payoffs = action_payoffs(problem, member, &atoms);
                totals[m] += played_payoff(&transcript.records[t].adversary[c], &payoffs[c]);
            }
        }
        return Ok(totals.into_iter().fold(f64::INFINITY, f64::min));
    }
    let sig = problem.signature();
    let rows = problem.objectives().component_rows(c);
    if rows.len() != 1 {
        return Err(Error::Unsupported("learner hindsight search over multi-row components".into()));
    }
    let grid = simplex_grid(sig.k, LEARNER_HINDSIGHT_RESOLUTION);
    let work = transcript.len() as u128 * problem.domain_size() as u128 * grid.len() as u128;
    if work > LEARNER_HINDSIGHT_CAP {
        return Err(Error::SizeCap {
            what: "learner hindsight search",
            requested: work,
            cap: LEARNER_HINDSIGHT_CAP,
            hint: "compute weak regret instead",
        });
    }
    let n = problem.domain_size();
    // totals[x][g]: cumulative loss of playing grid point g at x in every round.
    let mut totals = vec![vec![0.0; grid.len()]; n];
    for t in 0..transcript.len() {
        let atoms = round_atoms(transcript, problem, t, flavor, exact)?;
        let LearnerPlay::Predictor(h) = &transcript.records[t].learner else {
            return Err(Error::Unsupported("mixture plays without a class".into()));
        };
        let record = &transcript.records[t].adversary[c];
        for x in 0..n {
            let local: Vec<WeightedAtoms> =
                atoms.iter().map(|list| list.iter().filter(|(z, _)| z.x == x).copied().collect()).collect();
            if local.iter().all(|l| l.is_empty()) {
                continue;
            }
            for (g, point) in grid.iter().enumerate() {
                let mut values = h.at(x).values().to_vec();
                values[rows.start * sig.k..rows.end * sig.k].copy_from_slice(point);
                let mut table = h.table().to_vec();
                table[x] = Prediction::new(sig, values)?;
                let candidate = DeterministicPredictor::new(table)?;
                let payoffs = action_payoffs(problem, &candidate, &local);
                totals[x][g] += played_payoff(record, &payoffs[c]);
            }
        }
    }
    Ok(totals.iter().map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min)).sum())
}

/// Every regret of a transcript that its data supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    /// Rounds covered.
    pub rounds: usize,
    /// Per component: adversary standard regret on recorded samples.
    pub adversary_empirical: Vec<Option<f64>>,
    /// Per component: adversary standard regret on the tabular law.
    pub adversary_exact: Vec<f64>,
    /// Per component: learner weak regret on recorded samples.
    pub learner_weak_empirical: Vec<Option<f64>>,
    /// Per component: learner weak regret on the tabular law.
    pub learner_weak_exact: Vec<Option<f64>>,
    /// Minmax reference used by the weak regrets.
    pub reference: Option<f64>,
}

impl RegretLedger {
    /// Computes the ledger; empirical entries need recorded samples and
    /// weak entries need a reference value.
    pub fn compute(transcript: &Transcript, problem: &MultiObjectiveProblem, reference: Option<f64>) -> Result<Self> {
        let b = problem.num_components();
        let has_samples = transcript.records.iter().all(|r| r.samples.len() == problem.distributions().len());
        let get = |player, flavor, kind| -> Result<Option<f64>> {
            if flavor == RegretFlavor::Empirical && !has_samples {
                return Ok(None);
            }
            if kind == RegretKind::Weak && reference.is_none() {
                return Ok(None);
            }
            compute_regret(transcript, problem, player, flavor, kind, reference).map(Some)
        };
        let mut ledger = RegretLedger {
            rounds: transcript.len(),
            adversary_empirical: Vec::with_capacity(b),
            adversary_exact: Vec::with_capacity(b),
            learner_weak_empirical: Vec::with_capacity(b),
            learner_weak_exact: Vec::with_capacity(b),
            reference,
        };
        for c in 0..b {
            ledger.adversary_empirical.push(get(Player::Adversary(c), RegretFlavor::Empirical, RegretKind::Standard)?);
            ledger.adversary_exact.push(
                get(Player::Adversary(c), RegretFlavor::Exact, RegretKind::Standard)?.expect("exact standard regret"),
            );
            ledger.learner_weak_empirical.push(get(Player::Learner(c), RegretFlavor::Empirical, RegretKind::Weak)?);
            ledger.learner_weak_exact.push(get(Player::Learner(c), RegretFlavor::Exact, RegretKind::Weak)?);
        }
        Ok(ledger)
    }
}
