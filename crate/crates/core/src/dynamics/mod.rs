//! Game-dynamics drivers and their bookkeeping.
//!
//! * [`nrnr`]: no-regret vs no-regret. Every component's adversary runs
//!   Hedge over `(distribution, objective)` actions on single-sample loss
//!   estimates; the learner is the grid best responder, the lazy per-point
//!   learner, or Hedge over an explicit class (competitive problems). The
//!   output is the uniform mixture over the learner's plays.
//! * [`nrbr`]: no-regret vs best response. The lazy learner leads and an
//!   oracle answers every round; every iterate is deterministic.
//! * [`find`]: post-hoc selection of a good iterate.
//! * [`rounding`]: majority-vote rounding of an ensemble to a deterministic
//!   predictor.
//! * [`transcript`] and [`ledger`]: per-round records and regret accounting.

pub mod find;
pub mod ledger;
pub mod nrbr;
pub mod nrnr;
pub mod payoff;
pub mod rounding;
pub mod transcript;

pub use find::{find, find_sample_size, FindMode, FindOutcome};
pub use ledger::{compute_regret, Player, RegretFlavor, RegretKind, RegretLedger};
pub use nrbr::{run_nrbr, NrbrConfig, NrbrOutcome};
pub use nrnr::{run_nrnr, LearnerChoice, NrnrConfig, NrnrOutcome};
pub use payoff::{action_payoffs, exact_atoms, sample_atoms, WeightedAtoms};
pub use rounding::majority_round;
pub use transcript::{AdversaryRecord, DynamicsKind, LearnerPlay, RoundRecord, Transcript};

use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;

/// Total number of adversary actions over all components, `|𝒢|` in the
/// horizon and sample-size formulas.
pub fn action_count(problem: &MultiObjectiveProblem) -> usize {
    (0..problem.num_components()).map(|c| problem.num_actions(c)).sum()
}

/// Default no-regret-vs-no-regret horizon `⌈16 ε⁻² ln(2|𝒢|/δ)⌉`.
pub fn default_nrnr_horizon(epsilon: f64, delta: f64, num_actions: usize) -> Result<usize> {
    check_accuracy(epsilon, delta)?;
    Ok((16.0 / (epsilon * epsilon) * (2.0 * num_actions as f64 / delta).ln()).ceil().max(1.0) as usize)
}

/// Default no-regret-vs-best-response horizon `⌈16 ε⁻² ln k⌉` (at least one
/// round; `k = 2` gives `ln 2`).
pub fn default_nrbr_horizon(epsilon: f64, k: usize) -> Result<usize> {
    check_accuracy(epsilon, 0.5)?;
    Ok((16.0 / (epsilon * epsilon) * (k.max(2) as f64).ln()).ceil().max(1.0) as usize)
}

fn check_accuracy(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}
