//! The per-point lazy learner.
//!
//! For every point `x` and prediction row, the learner keeps an independent
//! Hedge over the `k` classes and emits its distribution as the prediction
//! row. Each round, the loss fed to the Hedge at `(x, row)` is the
//! coefficient vector `f(h, x)` of the adversary's play restricted to that
//! row: `Σ q_ℓ · sign_ℓ · e_{coord_ℓ}` over the objectives whose gate is open
//! under the learner's own current prediction. Points where every gate is
//! closed receive no update. Because every objective in scope scores a
//! single row, the per-row decomposition keeps each row's regret at
//! `O(√(T ln k))`.

use serde::{Deserialize, Serialize};

use super::hedge::HedgeState;
use super::AdversaryPlay;
use crate::domain::{DeterministicPredictor, DomainPoint, Prediction, Signature};
use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;

/// Lazily instantiated per-point, per-row Hedge learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLazyLearner {
    signature: Signature,
    horizon: usize,
    points: Vec<Option<Vec<HedgeState>>>,
}

impl PointLazyLearner {
    /// Learner over `domain_size` points for a horizon of `horizon` rounds.
    pub fn new(signature: Signature, domain_size: usize, horizon: usize) -> Result<Self> {
        if signature.k < 2 || signature.rows == 0 {
            return Err(Error::InvalidConfig(format!("lazy learner needs k >= 2 and rows >= 1, got {signature}")));
        }
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(Self { signature, horizon, points: vec![None; domain_size] })
    }

    /// Signature of emitted predictions.
    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Whether point `x` has received an update.
    pub fn touched(&self, x: DomainPoint) -> bool {
        self.points[x].is_some()
    }

    /// Current prediction at `x`: the rows' Hedge distributions (uniform
    /// before the first update).
    pub fn predict(&self, x: DomainPoint) -> Prediction {
        match &self.points[x] {
            None => Prediction::uniform(self.signature),
            Some(rows) => {
                let values: Vec<f64> = rows.iter().flat_map(|h| h.distribution()).collect();
                Prediction::normalized(self.signature, values).expect("Hedge distributions are on the simplex")
            }
        }
    }

    /// Current prediction at every point.
    pub fn predictor(&self) -> DeterministicPredictor {
        DeterministicPredictor::new((0..self.points.len()).map(|x| self.predict(x)).collect())
            .expect("nonempty domain with a shared signature")
    }

    /// Feeds a loss vector (length `k`, entries in `[-1, 1]`) to the Hedge
    /// at `(x, row)`.
    pub fn update_row(&mut self, x: DomainPoint, row: usize, loss: &[f64]) {
        let (k, rows, horizon) = (self.signature.k, self.signature.rows, self.horizon);
        let states = self.points[x].get_or_insert_with(|| {
            (0..rows).map(|_| HedgeState::new(k, horizon).expect("k >= 2 and horizon >= 1")).collect()
        });
        states[row].update(loss);
    }
}

/// Feeds one round of adversary plays (one per component) to the learner.
///
/// `current` must be the learner's own prediction for this round, since the
/// gates of the fed loss vectors depend on it. Returns the number of
/// `(point, row)` Hedge updates applied.
pub fn lazy_update(
    learner: &mut PointLazyLearner,
    problem: &MultiObjectiveProblem,
    plays: &[AdversaryPlay<'_>],
    current: &DeterministicPredictor,
) -> Result<usize> {
    if plays.len() != problem.num_components() {
        return Err(Error::InvalidConfig(format!(
            "{} plays supplied for {} components",
            plays.len(),
            problem.num_components()
        )));
    }
    if learner.signature() != problem.signature() {
        return Err(Error::SignatureMismatch {
            expected: problem.signature().to_string(),
            found: learner.signature().to_string(),
        });
    }
    let set = problem.objectives();
    if !set.supports_row_visits() {
        return Err(Error::Unsupported("the lazy learner cannot play amplified objective sets".into()));
    }
    let k = problem.signature().k;
    let mut loss = vec![0.0; k];
    let mut updates = 0;
    for x in 0..problem.domain_size() {
        let weights = problem.point_weights(x);
        if weights.is_empty() {
            continue;
        }
        let pred = current.at(x);
        for (c, play) in plays.iter().enumerate() {
            if matches!(play, AdversaryPlay::Idle) {
                continue;
            }
            for row in set.component_rows(c) {
                loss.iter_mut().for_each(|l| *l = 0.0);
                let code = set.row_code(row, pred.row(row));
                for pw in weights {
                    for &(w, pw_x) in &pw.memberships {
                        set.visit_row(row, code, pred, w, |t| {
                            let q = play.weight(problem.action_index(c, pw.distribution, t.index));
                            if q != 0.0 {
                                loss[t.coord] += pw.weight * pw_x * q * t.sign;
                            }
                        });
                    }
                }
                if loss.iter().any(|&l| l != 0.0) {
                    for l in loss.iter_mut() {
                        *l = l.clamp(-1.0, 1.0);
                    }
                    learner.update_row(x, row, &loss);
                    updates += 1;
                }
            }
        }
    }
    Ok(updates)
}
