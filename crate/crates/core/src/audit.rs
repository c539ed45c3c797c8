//! Exact calibration audits and brute-force minmax values.
//!
//! Every audit is an exact sum over the tabular support, written directly
//! from the calibration definitions (never through the objective sets), so
//! that comparing an audit against the maximum exact objective loss checks
//! the objective constructions independently. Group memberships come from
//! the law's membership vectors `w`; for feature-defined groups these are
//! the point's group memberships.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::TabularDistribution;
use crate::domain::{bin_of, DeterministicPredictor, Hypothesis, LevelGrid, Prediction};
use crate::error::{Error, Result};
use crate::objectives::MultiObjectiveProblem;
use crate::players::simplex_grid;

/// Where an audit's maximum is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditWitness {
    /// Group (absent for ungated audits).
    pub group: Option<usize>,
    /// Gating bins: the full bin vector for multi-calibration, or
    /// `[mean bin, moment bin]` for moment audits.
    pub bins: Vec<usize>,
    /// Scored coordinate.
    pub coord: usize,
    /// Moment degree (moment audits).
    pub degree: Option<u32>,
    /// Signed expectation (its absolute value is the violation).
    pub signed: f64,
}

/// Maximum violation with its witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Maximum absolute violation (zero when nothing is gated open).
    pub value: f64,
    /// Achieving cell, when any cell has mass.
    pub witness: Option<AuditWitness>,
}

impl AuditReport {
    fn from_cells(cells: BTreeMap<(Option<usize>, Vec<usize>, usize, Option<u32>), f64>) -> Self {
        let mut best: Option<AuditWitness> = None;
        for ((group, bins, coord, degree), signed) in cells {
            if best.as_ref().is_none_or(|b| signed.abs() > b.signed.abs()) {
                best = Some(AuditWitness { group, bins, coord, degree, signed });
            }
        }
        AuditReport { value: best.as_ref().map_or(0.0, |w| w.signed.abs()), witness: best }
    }
}

/// Multi-calibration (or agnostic multi-calibration) audit:
/// `max_{i, v, j} |E[(h(x) − y)_j · 1[h(x) ∈ v, i ∈ w]]|`.
pub fn audit_multicalibration<H: Hypothesis + ?Sized>(h: &H, dist: &TabularDistribution, grid: &LevelGrid) -> AuditReport {
    audit_gated(h, dist, grid, true)
}

/// Agnostic multi-calibration audit; identical to
/// [`audit_multicalibration`] on laws with identity-group memberships.
pub fn audit_agnostic<H: Hypothesis + ?Sized>(h: &H, dist: &TabularDistribution, grid: &LevelGrid) -> AuditReport {
    audit_gated(h, dist, grid, true)
}

fn audit_gated<H: Hypothesis + ?Sized>(h: &H, dist: &TabularDistribution, grid: &LevelGrid, by_group: bool) -> AuditReport {
    let mut cells = BTreeMap::new();
    for (weight, m) in h.weighted_members() {
        for cell in dist.cells() {
            let p = m.at(cell.x).row(0);
            let bins = bin_of(&Prediction::single(p.to_vec()).expect("rows are valid"), grid);
            let groups: Vec<Option<usize>> =
                if by_group { cell.w.iter().filter(|&g| g < dist.group_count()).map(Some).collect() } else { vec![None] };
            for g in groups {
                for (j, (&pj, &lj)) in p.iter().zip(&cell.label_law).enumerate() {
                    *cells.entry((g, bins.clone(), j, None)).or_insert(0.0) += weight * cell.mass * (pj - lj);
                }
            }
        }
    }
    AuditReport::from_cells(cells)
}

/// Conditional multi-calibration audit: for every group `i`,
/// `max_{v, j} |E[(h(x) − y)_j · 1[h(x) ∈ v] | i ∈ w]|`, with the
/// per-group breakdown.
pub fn audit_conditional<H: Hypothesis + ?Sized>(
    h: &H,
    dist: &TabularDistribution,
    grid: &LevelGrid,
) -> Result<(AuditReport, Vec<AuditReport>)> {
    let per_group = (0..dist.group_count())
        .map(|i| {
            let cond = dist.condition_on_group(i)?;
            let mut r = audit_gated(h, &cond, grid, false);
            if let Some(w) = r.witness.as_mut() {
                w.group = Some(i);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = per_group
        .iter()
        .fold(None::<&AuditReport>, |b, r| match b {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .cloned()
        .unwrap_or(AuditReport { value: 0.0, witness: None });
    Ok((worst, per_group))
}

/// Mean-conditioned moment audit of a binary predictor whose row 0 is the
/// mean predictor and whose row `1 + i` predicts the centered moment of
/// degree `degrees[i]`. Cells are `(group, mean bin, moment bin)` on the
/// first coordinate of each row. Returns `(mean report, moment report)`;
/// odd degrees compare against the centered moment clipped to `[0, 1]`.
pub fn audit_moment<H: Hypothesis + ?Sized>(
    h: &H,
    dist: &TabularDistribution,
    grid: &LevelGrid,
    degrees: &[u32],
) -> Result<(AuditReport, AuditReport)> {
    if dist.k() != 2 {
        return Err(Error::InvalidConfig("moment audits are binary".into()));
    }
    if h.signature().rows != 1 + degrees.len() {
        return Err(Error::SignatureMismatch {
            expected: format!("{} rows", 1 + degrees.len()),
            found: format!("{} rows", h.signature().rows),
        });
    }
    let mut mean_cells = BTreeMap::new();
    let mut moment_cells = BTreeMap::new();
    for (weight, m) in h.weighted_members() {
        for cell in dist.cells() {
            let pred = m.at(cell.x);
            let mean = pred.row(0)[0];
            let v = grid.bin(mean);
            let p1 = cell.label_law[0];
            for (i, &a) in degrees.iter().enumerate() {
                let moment = pred.row(1 + i)[0];
                let vm = grid.bin(moment);
                // E[(y1 − mean)^a | x, w], clipped per outcome as in the objectives.
                let target = p1 * (1.0 - mean).powi(a as i32).clamp(0.0, 1.0) + (1.0 - p1) * (-mean).powi(a as i32).clamp(0.0, 1.0);
                for g in cell.w.iter().filter(|&g| g < dist.group_count()) {
                    *mean_cells.entry((Some(g), vec![v, vm], 0, Some(a))).or_insert(0.0) += weight * cell.mass * (mean - p1);
                    *moment_cells.entry((Some(g), vec![v, vm], 0, Some(a))).or_insert(0.0) +=
                        weight * cell.mass * (moment - target);
                }
            }
        }
    }
    Ok((AuditReport::from_cells(mean_cells), AuditReport::from_cells(moment_cells)))
}

/// Covariance slack `Δ = max_{v, i, j} E_x[Cov(1[h(x) ∈ v, i ∈ w], y_j | x)]`
/// of a deterministic predictor, with the maximizing `(group, bins, coord)`.
pub fn covariance_slack(h: &DeterministicPredictor, dist: &TabularDistribution, grid: &LevelGrid) -> AuditReport {
    let mut cells = BTreeMap::new();
    for x in dist.support() {
        let bins = bin_of(&Prediction::single(h.at(x).row(0).to_vec()).expect("valid row"), grid);
        let px = dist.px()[x];
        let at_x = dist.cells_at(x);
        for g in 0..dist.group_count() {
            // Within x: P(i ∈ w | x), E[y_j | x] and E[1[i ∈ w] y_j | x].
            let pin: f64 = at_x.iter().filter(|c| c.w.contains(g)).map(|c| c.mass / px).sum();
            for j in 0..dist.k() {
                let ey: f64 = at_x.iter().map(|c| c.mass / px * c.label_law[j]).sum();
                let joint: f64 = at_x.iter().filter(|c| c.w.contains(g)).map(|c| c.mass / px * c.label_law[j]).sum();
                *cells.entry((Some(g), bins.clone(), j, None)).or_insert(0.0) += px * (joint - pin * ey);
            }
        }
    }
    // Δ is a signed maximum, not an absolute one.
    let mut best: Option<AuditWitness> = None;
    for ((group, bins, coord, degree), signed) in cells {
        if best.as_ref().is_none_or(|b| signed > b.signed) {
            best = Some(AuditWitness { group, bins, coord, degree, signed });
        }
    }
    AuditReport { value: best.as_ref().map_or(0.0, |w| w.signed), witness: best }
}

/// Limits of the exhaustive minmax search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceConfig {
    /// Largest domain searched.
    pub max_domain: usize,
    /// Smallest grid step accepted.
    pub min_step: f64,
    /// Largest number of candidate predictors enumerated.
    pub max_candidates: u128,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self { max_domain: 4, min_step: 0.25, max_candidates: 5_000_000 }
    }
}

/// Result of the exhaustive minmax search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOpt {
    /// `min_h max_{D, ℓ} L_{D,ℓ}(h)` over the product grid.
    pub value: f64,
    /// First minimizer in enumeration order.
    pub argmin: DeterministicPredictor,
    /// Grid step of every coordinate.
    pub step: f64,
    /// Number of candidates enumerated.
    pub candidates: u128,
    /// Discretization slack: the true minimum over all predictors can lie
    /// below `value` by up to this amount (one grid step per coordinate,
    /// as objective values are 1-Lipschitz in the scored coordinate away
    /// from bin boundaries).
    pub slack: f64,
}

/// Exhaustive `min_h max_{D, ℓ} L_{D,ℓ}(h)` over predictors whose rows lie
/// on the step-`step` simplex grid at every point.
pub fn brute_force_opt(problem: &MultiObjectiveProblem, step: f64, cfg: &BruteForceConfig) -> Result<BruteForceOpt> {
    let n = problem.domain_size();
    if n > cfg.max_domain {
        return Err(Error::SizeCap {
            what: "brute-force domain",
            requested: n as u128,
            cap: cfg.max_domain as u128,
            hint: "brute-force minmax values are for tiny instances; use realizability instead",
        });
    }
    let r = (1.0 / step).round();
    if step < cfg.min_step - 1e-12 || (r * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "brute-force step must be 1/r with step >= {}, got {step}",
            cfg.min_step
        )));
    }
    let sig = problem.signature();
    let row_grid = simplex_grid(sig.k, r as usize);
    // Per-point options: products of row-grid points over all rows.
    let mut options: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..sig.rows {
        options = options
            .iter()
            .flat_map(|prefix| row_grid.iter().map(move |row| [prefix.as_slice(), row.as_slice()].concat()))
            .collect();
    }
    let per_point = options.len() as u128;
    let total = (0..n).fold(1u128, |acc, _| acc.saturating_mul(per_point));
    if total > cfg.max_candidates {
        return Err(Error::SizeCap {
            what: "brute-force candidate predictors",
            requested: total,
            cap: cfg.max_candidates,
            hint: "use a coarser grid step or a smaller instance",
        });
    }
    // contributions[x][o]: sparse (action slot, value) pairs of option o at x.
    let offsets: Vec<usize> = {
        let mut acc = 0;
        (0..problem.num_components())
            .map(|c| {
                let o = acc;
                acc += problem.num_actions(c);
                o
            })
            .collect()
    };
    let width: usize = offsets.last().copied().unwrap_or(0) + problem.num_actions(problem.num_components() - 1);
    let uniform = Prediction::uniform(sig);
    let contributions: Vec<Vec<Vec<(usize, f64)>>> = (0..n)
        .map(|x| {
            options
                .iter()
                .map(|vals| {
                    let mut table = vec![uniform.clone(); n];
                    table[x] = Prediction::new(sig, vals.clone())?;
                    let h = DeterministicPredictor::new(table)?;
                    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
                    for (d, dist) in problem.distributions().iter().enumerate() {
                        for a in dist.atoms().iter().filter(|a| a.sample.x == x) {
                            let z = a.sample;
                            problem.objectives().for_each_open(h.at(x), x, z.w, z.y, |i, v| {
                                let c = problem.objectives().component_of(i);
                                *out.entry(offsets[c] + problem.action_index(c, d, i)).or_insert(0.0) += a.prob * v;
                            });
                        }
                    }
                    Ok(out.into_iter().collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![0.0; width];
    let mut choice = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut count: u128 = 0;
    loop {
        totals.iter_mut().for_each(|v| *v = 0.0);
        for (x, &o) in choice.iter().enumerate() {
            for &(slot, v) in &contributions[x][o] {
                totals[slot] += v;
            }
        }
        let value = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        count += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, choice.clone()));
        }
        // Odometer increment, last point fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < options.len() {
                break;
            }
            choice[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }
    let (value, picks) = best.expect("at least one candidate");
    let argmin = DeterministicPredictor::new(
        picks.iter().map(|&o| Prediction::new(sig, options[o].clone())).collect::<Result<Vec<_>>>()?,
    )?;
    Ok(BruteForceOpt { value, argmin, step, candidates: count, slack: step })
}
