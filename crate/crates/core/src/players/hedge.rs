//! Hedge (multiplicative weights) over a finite action set.
//!
//! Losses arrive in `[-1, 1]` and are rescaled affinely to `[0, 1]` via
//! `(ℓ + 1) / 2` before the exponential update. The learning rate is the
//! fixed-horizon rate `η = √(8 ln n / T)`, for which the regret against the
//! best fixed action is at most `√(T ln n / 2)` in rescaled units, i.e.
//! `√(2 T ln n)` in the original `[-1, 1]` units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack tolerated on the `[-1, 1]` loss contract (floating-point sums).
const LOSS_SLACK: f64 = 1e-9;

/// Fixed-horizon Hedge learning rate `√(8 ln n / T)`.
pub fn hedge_rate(n: usize, horizon: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (8.0 * (n as f64).ln() / horizon as f64).sqrt()
    }
}

/// State of a Hedge learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    log_weights: Vec<f64>,
    eta: f64,
    horizon: usize,
    rounds: usize,
}

impl HedgeState {
    /// Uniform start over `n` actions for a horizon of `horizon` rounds.
    pub fn new(n: usize, horizon: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("Hedge action set"));
        }
        if horizon == 0 {
            return Err(Error::InvalidConfig("Hedge horizon must be at least 1".into()));
        }
        Ok(Self { log_weights: vec![0.0; n], eta: hedge_rate(n, horizon), horizon, rounds: 0 })
    }

    /// Uniform start with an explicit learning rate.
    pub fn with_rate(n: usize, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("Hedge action set"));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be finite and nonnegative, got {eta}")));
        }
        Ok(Self { log_weights: vec![0.0; n], eta, horizon: 0, rounds: 0 })
    }

    /// Number of actions.
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    /// Always false: the constructors reject empty action sets.
    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Learning rate η.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Configured horizon (zero when built with an explicit rate).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Updates applied so far.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Applies one round of losses in `[-1, 1]`.
    ///
    /// # Panics
    /// Panics when the vector has the wrong length or a loss lies outside
    /// `[-1, 1]`.
    pub fn update(&mut self, loss: &[f64]) {
        assert_eq!(loss.len(), self.log_weights.len(), "Hedge loss vector has the wrong length");
        for (lw, &l) in self.log_weights.iter_mut().zip(loss) {
            assert!(l.abs() <= 1.0 + LOSS_SLACK, "Hedge loss {l} outside [-1, 1]");
            *lw -= self.eta * (l + 1.0) / 2.0;
        }
        self.rounds += 1;
        self.recenter();
    }

    /// Applies one round whose losses are zero except at the listed actions
    /// (indices may repeat; their losses add). Equivalent to [`update`] on the
    /// dense vector: the rescaling's constant shift cancels on normalization.
    ///
    /// [`update`]: HedgeState::update
    pub fn update_sparse<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) {
        for (i, l) in entries {
            self.log_weights[i] -= self.eta * l / 2.0;
        }
        self.rounds += 1;
        self.recenter();
    }

    fn recenter(&mut self) {
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top.abs() > 1e3 {
            self.log_weights.iter_mut().for_each(|lw| *lw -= top);
        }
    }

    /// Current distribution over actions.
    pub fn distribution(&self) -> Vec<f64> {
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = self.log_weights.iter().map(|lw| (lw - top).exp()).collect();
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= sum);
        p
    }

    /// Writes the current distribution into `out` (avoids reallocating).
    pub fn distribution_into(&self, out: &mut Vec<f64>) {
        out.clear();
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.extend(self.log_weights.iter().map(|lw| (lw - top).exp()));
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Regret of a realized play sequence against the best fixed action:
/// `Σ_t ⟨p_t, ℓ_t⟩ − min_i Σ_t ℓ_t[i]`.
pub fn realized_regret(plays: &[Vec<f64>], losses: &[Vec<f64>]) -> f64 {
    assert_eq!(plays.len(), losses.len(), "one play per loss vector");
    let Some(first) = losses.first() else { return 0.0 };
    let mut totals = vec![0.0; first.len()];
    let mut incurred = 0.0;
    for (p, l) in plays.iter().zip(losses) {
        incurred += p.iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
        totals.iter_mut().zip(l).for_each(|(t, v)| *t += v);
    }
    incurred - totals.iter().cloned().fold(f64::INFINITY, f64::min)
}
