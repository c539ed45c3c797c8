//! Regret minimizers and oracles.
//!
//! * [`hedge`]: multiplicative weights over a finite action set (the
//!   adversary in no-regret-vs-no-regret runs).
//! * [`lazy`]: the per-point learner that keeps one `k`-action Hedge per
//!   `(point, row)` and plays its distributions as the prediction itself.
//! * [`best_response`]: the sample-free per-point grid best responder.
//! * [`oracle`]: exact, empirical, weak and report-noisy-max adversary
//!   oracles.
//! * [`minimax`]: small exact matrix-game solvers used by the best responder.

pub mod best_response;
pub mod hedge;
pub mod lazy;
pub mod minimax;
pub mod oracle;

pub use best_response::{best_response, simplex_grid, BestResponseConfig, RandomizedResponse};
pub use hedge::{hedge_rate, realized_regret, HedgeState};
pub use lazy::{lazy_update, PointLazyLearner};
pub use oracle::{agnostic_oracle, noisy_max_oracle, weak_oracle, Counters, OracleAnswer, OracleConfig, OracleMode, SampleBuffer};

/// What the adversary of one component played in a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryPlay<'a> {
    /// A mixture over the component's actions.
    Mixed(&'a [f64]),
    /// A single action.
    Pure(usize),
    /// No objective (a weak oracle reported that none clears its threshold).
    Idle,
}

impl AdversaryPlay<'_> {
    /// Probability the play assigns to action `a`.
    #[inline]
    pub fn weight(&self, a: usize) -> f64 {
        match self {
            AdversaryPlay::Mixed(q) => q[a],
            AdversaryPlay::Pure(p) => (*p == a) as u8 as f64,
            AdversaryPlay::Idle => 0.0,
        }
    }
}
