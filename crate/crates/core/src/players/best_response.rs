//! The sample-free per-point best responder.
//!
//! Given the adversary's mixture `q` over linear objectives, the learner's
//! expected loss decomposes over points, and at each point it is linear in
//! the label embedding. For every point and row, the responder therefore
//! solves the finite matrix game whose rows are the simplex-grid predictions
//! of step `1/r` and whose columns are the `k` vertex labels (a linear loss
//! attains its maximum over the label simplex at a vertex).
//!
//! The response is randomized: a deterministic grid prediction can be
//! forced to a loss near the coefficient mass when the mixture puts
//! opposite-signed weight on adjacent bins, whereas the grid game's value is
//! at most `1/r` per unit of coefficient mass (mix the two grid points that
//! bracket the adversary's label mean). Realizing the mixture per point
//! yields a deterministic predictor whose loss, in expectation over the
//! realization, meets the bound for every sample.

use rand::Rng;

use super::minimax::solve_matrix_game;
use crate::domain::{DeterministicPredictor, DomainPoint, Prediction, Signature};
use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;

/// Configuration of the grid best responder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseConfig {
    /// Grid resolution `r`: coordinates are multiples of `1/r`.
    pub resolution: usize,
    /// Maximum number of simplex-grid points per row.
    pub grid_cap: usize,
}

impl BestResponseConfig {
    /// Resolution `r` with the default grid cap.
    pub fn new(resolution: usize) -> Self {
        Self { resolution, grid_cap: 50_000 }
    }
}

/// Number of points of the step-`1/r` grid on the `k`-simplex.
pub(crate) fn grid_size(k: usize, r: usize) -> u128 {
    // C(r + k - 1, k - 1)
    let mut c: u128 = 1;
    for i in 0..(k as u128 - 1) {
        c = c.saturating_mul(r as u128 + 1 + i) / (i + 1);
    }
    c
}

/// All points of the `k`-simplex whose coordinates are multiples of `1/r`,
/// in lexicographic order of their integer numerators.
pub fn simplex_grid(k: usize, r: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, r: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == k - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&i| i as f64 / r as f64).collect());
            prefix.pop();
            return;
        }
        for i in 0..=left {
            prefix.push(i);
            rec(k, left - i, r, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, r, r, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Per-point randomized response: for every point and component row, a
/// mixture over grid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedResponse {
    signature: Signature,
    table: Vec<Vec<Vec<(Vec<f64>, f64)>>>,
    worst_value: f64,
}

impl RandomizedResponse {
    /// Mixture over row values at `(x, row)`, `row` relative to the component.
    pub fn mixture(&self, x: DomainPoint, row: usize) -> &[(Vec<f64>, f64)] {
        &self.table[x][row]
    }

    /// Signature of realized predictions (the component's rows).
    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Largest per-point game value, in units of the point's coefficient
    /// mass (at most `1/r`).
    pub fn worst_value(&self) -> f64 {
        self.worst_value
    }

    /// Whether every mixture is a single grid point.
    pub fn is_pure(&self) -> bool {
        self.table.iter().flatten().all(|m| m.len() == 1)
    }

    /// Draws one grid row per `(x, row)`; consumes randomness only where a
    /// mixture has more than one support point.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> DeterministicPredictor {
        let table = self
            .table
            .iter()
            .map(|rows| {
                let values: Vec<f64> = rows
                    .iter()
                    .flat_map(|m| {
                        let chosen = if m.len() == 1 {
                            &m[0].0
                        } else {
                            let u: f64 = rng.random();
                            let mut acc = 0.0;
                            let mut pick = &m[m.len() - 1].0;
                            for (v, p) in m {
                                acc += p;
                                if u < acc {
                                    pick = v;
                                    break;
                                }
                            }
                            pick
                        };
                        chosen.iter().copied()
                    })
                    .collect();
                Prediction::new(self.signature, values).expect("grid rows lie on the simplex")
            })
            .collect();
        DeterministicPredictor::new(table).expect("shared signature")
    }
}

/// Best response of component `c` to the adversary mixture `q` (dense over
/// the component's actions). Rows outside the component are read from
/// `context` (uniform when absent).
pub fn best_response(
    problem: &MultiObjectiveProblem,
    c: usize,
    q: &[f64],
    cfg: BestResponseConfig,
    context: Option<&DeterministicPredictor>,
) -> Result<RandomizedResponse> {
    let set = problem.objectives();
    if !set.supports_row_visits() {
        return Err(Error::Unsupported("the grid best responder cannot play amplified objective sets".into()));
    }
    if q.len() != problem.num_actions(c) {
        return Err(Error::InvalidConfig(format!(
            "mixture has {} entries but component {c} has {} actions",
            q.len(),
            problem.num_actions(c)
        )));
    }
    if cfg.resolution < 1 {
        return Err(Error::InvalidGrid("best-response resolution must be at least 1".into()));
    }
    let sig = problem.signature();
    let k = sig.k;
    let count = grid_size(k, cfg.resolution);
    if count > cfg.grid_cap as u128 {
        return Err(Error::SizeCap {
            what: "best-response grid",
            requested: count,
            cap: cfg.grid_cap as u128,
            hint: "use the lazy learner for many classes or fine resolutions",
        });
    }
    if let Some(ctx) = context {
        problem.check_predictor(ctx)?;
    }
    let grid = simplex_grid(k, cfg.resolution);
    let rows = set.component_rows(c);
    let mut payoff = vec![0.0; grid.len() * k];
    let mut worst_value = f64::NEG_INFINITY;
    let mut table = Vec::with_capacity(problem.domain_size());
    for x in 0..problem.domain_size() {
        let weights = problem.point_weights(x);
        let ctx = context.map(|h| h.at(x).clone()).unwrap_or_else(|| Prediction::uniform(sig));
        let mut per_row = Vec::with_capacity(rows.len());
        for row in rows.clone() {
            payoff.iter_mut().for_each(|v| *v = 0.0);
            let mut mass = 0.0;
            for (gi, point) in grid.iter().enumerate() {
                let code = set.row_code(row, point);
                let cell = &mut payoff[gi * k..(gi + 1) * k];
                let mut point_mass = 0.0;
                for pw in weights {
                    for &(w, pw_x) in &pw.memberships {
                        set.visit_row(row, code, &ctx, w, |t| {
                            let coef = pw.weight * pw_x * q[problem.action_index(c, pw.distribution, t.index)];
                            if coef != 0.0 {
                                point_mass += coef;
                                for (y, v) in cell.iter_mut().enumerate() {
                                    *v += coef * t.value(point[t.coord], y);
                                }
                            }
                        });
                    }
                }
                mass = f64::max(mass, point_mass);
            }
            let solution = solve_matrix_game(&payoff, grid.len(), k);
            if mass > 0.0 {
                worst_value = worst_value.max(solution.value / mass);
            }
            per_row.push(solution.support.into_iter().map(|(gi, p)| (grid[gi].clone(), p)).collect());
        }
        table.push(per_row);
    }
    Ok(RandomizedResponse {
        signature: Signature::new(k, rows.len()),
        table,
        worst_value: if worst_value.is_finite() { worst_value } else { 0.0 },
    })
}
