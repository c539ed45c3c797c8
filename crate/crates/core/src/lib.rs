//! Multi-calibration through zero-sum game dynamics.
//!
//! The crate frames calibration requirements as a game between a learner,
//! who picks predictors, and an adversary, who picks linear calibration
//! objectives. It provides
//!
//! * [`domain`] and [`distribution`]: predictions, predictors and finite
//!   tabular laws over `(x, w, y)` with exact expectations and seeded
//!   sampling;
//! * [`objectives`]: the objective sets of every calibration variant
//!   (multi-calibration, moment, agnostic, conditional, competitive) and the
//!   [`objectives::MultiObjectiveProblem`] the drivers consume;
//! * [`players`]: Hedge, the per-point lazy learner, the grid best responder
//!   and the adversary oracles;
//! * [`dynamics`]: the no-regret-vs-no-regret and no-regret-vs-best-response
//!   drivers, iterate selection, majority-vote rounding and regret ledgers;
//! * [`audit`]: exact calibration audits and brute-force minmax values.

pub mod audit;
pub mod distribution;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod instances;
pub mod objectives;
pub mod players;

pub use distribution::{seeded_rng, SeededRng, TabularDistribution};
pub use domain::{
    bin_of, DeterministicPredictor, DomainPoint, EnsemblePredictor, GroupFamily, GroupMask, Hypothesis, LevelGrid,
    MixturePredictor, Prediction, Sample, Signature,
};
pub use error::{Error, Result};
pub use objectives::{LinearObjective, MultiObjectiveProblem, ObjectiveSet};
