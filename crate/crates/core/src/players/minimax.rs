//! Exact solvers for the small matrix games met by the grid best responder.
//!
//! The row player (the learner) picks a mixture `π` over `n` rows to
//! minimize `max_y Σ_p π_p A[p][y]` over `m` columns (labels). Two-column
//! games are solved by enumerating pure rows and equalizing pairs; larger
//! games go through a dense simplex method with Bland's rule.

/// Solution of a matrix game for the minimizing row player.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    /// Game value `min_π max_y (π^T A)_y`.
    pub value: f64,
    /// Optimal row mixture as `(row, probability)` pairs with positive mass.
    pub support: Vec<(usize, f64)>,
}

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Solves a game with two columns. `payoff[p] = (A[p][0], A[p][1])`.
///
/// An optimal mixture of a min–max of two linear functions has at most two
/// support points, and when it has two they equalize the columns; so the
/// optimum is either a pure row or an equalizing pair with opposite column
/// differences. Ties prefer pure rows, then smaller indices.
pub fn solve_two_column(payoff: &[[f64; 2]]) -> GameSolution {
    assert!(!payoff.is_empty(), "a matrix game needs at least one row");
    let mut best_value = f64::INFINITY;
    let mut best: Vec<(usize, f64)> = Vec::new();
    for (p, a) in payoff.iter().enumerate() {
        let v = a[0].max(a[1]);
        if v < best_value {
            best_value = v;
            best = vec![(p, 1.0)];
        }
    }
    let positive: Vec<usize> = (0..payoff.len()).filter(|&p| payoff[p][0] - payoff[p][1] > 0.0).collect();
    let negative: Vec<usize> = (0..payoff.len()).filter(|&p| payoff[p][0] - payoff[p][1] < 0.0).collect();
    for &p in &positive {
        let dp = payoff[p][0] - payoff[p][1];
        for &q in &negative {
            let dq = payoff[q][0] - payoff[q][1];
            let pi = -dq / (dp - dq);
            let v = pi * payoff[p][0] + (1.0 - pi) * payoff[q][0];
            if v < best_value - 1e-15 {
                best_value = v;
                best = vec![(p.min(q), if p < q { pi } else { 1.0 - pi }), (p.max(q), if p < q { 1.0 - pi } else { pi })];
            }
        }
    }
    best.retain(|(_, w)| *w > 0.0);
    GameSolution { value: best_value, support: best }
}

/// Solves a general game given as a row-major `n × m` payoff matrix.
///
/// Shifts the matrix to be positive, then solves
/// `max Σ u  s.t.  Aᵀu ≤ 1, u ≥ 0` by the simplex method; the optimal
/// mixture is `u / Σu` and the shifted value `1 / Σu`.
pub fn solve_matrix_game(payoff: &[f64], n: usize, m: usize) -> GameSolution {
    assert!(n > 0 && m > 0 && payoff.len() == n * m, "payoff matrix shape mismatch");
    if m == 2 {
        let rows: Vec<[f64; 2]> = payoff.chunks(2).map(|c| [c[0], c[1]]).collect();
        return solve_two_column(&rows);
    }
    let min = payoff.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    // Tableau: m constraint rows over n structural + m slack columns, plus rhs.
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for y in 0..m {
        for p in 0..n {
            t[y * width + p] = payoff[p * m + y] + shift;
        }
        t[y * width + n + y] = 1.0;
        t[y * width + width - 1] = 1.0;
    }
    // Objective row holds reduced costs of maximizing Σ u.
    for p in 0..n {
        t[m * width + p] = 1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        // Bland's rule: smallest improving column.
        let Some(enter) = (0..n + m).find(|&c| t[m * width + c] > PIVOT_TOLERANCE) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r * width + enter];
            if a > PIVOT_TOLERANCE {
                let ratio = t[r * width + width - 1] / a;
                leave = match leave {
                    Some((lr, lratio))
                        if lratio < ratio - 1e-15 || ((lratio - ratio).abs() <= 1e-15 && basis[lr] < basis[r]) =>
                    {
                        Some((lr, lratio))
                    }
                    _ => Some((r, ratio)),
                };
            }
        }
        let (row, _) = leave.expect("the game LP is bounded");
        let pivot = t[row * width + enter];
        for c in 0..width {
            t[row * width + c] /= pivot;
        }
        for r in 0..=m {
            if r != row {
                let factor = t[r * width + enter];
                if factor != 0.0 {
                    for c in 0..width {
                        t[r * width + c] -= factor * t[row * width + c];
                    }
                }
            }
        }
        basis[row] = enter;
    }
    let mut u = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            u[b] = t[r * width + width - 1].max(0.0);
        }
    }
    let total: f64 = u.iter().sum();
    let support: Vec<(usize, f64)> =
        u.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(p, v)| (p, v / total)).collect();
    // Report the value attained by the returned mixture (exact for it).
    let value = (0..m)
        .map(|y| support.iter().map(|&(p, w)| w * payoff[p * m + y]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    GameSolution { value, support }
}
