//! The multi-objective game consumed by the dynamics drivers: distributions,
//! an objective set, and the prediction signature.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_agnostic_objectives, build_conditional_objectives, build_moment_objectives, build_multicalib_objectives,
    BuildOptions, MomentDegrees, ObjectiveSet, SparseLosses,
};
use crate::distribution::TabularDistribution;
use crate::domain::{DeterministicPredictor, DomainPoint, GroupMask, Hypothesis, LevelGrid, Sample, Signature};
use crate::error::{Error, Result};

/// Calibration variant a problem encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Multi-calibration over feature groups.
    Mc,
    /// Mean-conditioned moment multi-calibration (two components).
    Moment,
    /// Agnostic multi-calibration over identity groups.
    Agnostic,
    /// Conditional multi-calibration over the conditional laws `D | S`.
    Conditional,
    /// Competitive (baseline-amplified) objectives.
    Competitive,
}

/// How much one distribution's objectives weigh at a point, and the
/// membership law the point carries under that distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PointWeight {
    /// Distribution index.
    pub distribution: usize,
    /// Relative weight `P_d(x) / P(x)`, normalized so the largest weight at
    /// the point is one.
    pub weight: f64,
    /// `(w, P_d(w | x))` pairs.
    pub memberships: Vec<(GroupMask, f64)>,
}

/// A multi-objective learning instance `(𝒟, 𝒢, H)`.
#[derive(Debug, Clone)]
pub struct MultiObjectiveProblem {
    kind: ProblemKind,
    distributions: Vec<TabularDistribution>,
    base: TabularDistribution,
    objectives: ObjectiveSet,
    point_weights: Vec<Vec<PointWeight>>,
    clipped_odd_moments: bool,
}

impl MultiObjectiveProblem {
    /// General constructor. `base` is the law whose marginal over points
    /// defines the per-point weights (the unconditioned law for conditional
    /// problems; the single distribution otherwise).
    pub fn new(
        kind: ProblemKind,
        distributions: Vec<TabularDistribution>,
        base: TabularDistribution,
        objectives: ObjectiveSet,
    ) -> Result<Self> {
        if distributions.is_empty() {
            return Err(Error::Empty("distribution list"));
        }
        let n = base.domain_size();
        for d in &distributions {
            if d.domain_size() != n || d.k() != base.k() {
                return Err(Error::InvalidDistribution("all distributions must share domain and classes".into()));
            }
        }
        if objectives.signature().k != base.k() {
            return Err(Error::SignatureMismatch {
                expected: format!("k={}", base.k()),
                found: objectives.signature().to_string(),
            });
        }
        let point_weights = (0..n)
            .map(|x| {
                let px = base.px()[x];
                let raw: Vec<f64> =
                    distributions.iter().map(|d| if px > 0.0 { d.px()[x] / px } else { 0.0 }).collect();
                let top = raw.iter().cloned().fold(0.0, f64::max);
                distributions
                    .iter()
                    .zip(&raw)
                    .enumerate()
                    .filter(|(_, (_, &r))| r > 0.0)
                    .map(|(i, (d, &r))| PointWeight {
                        distribution: i,
                        weight: r / top,
                        memberships: d.cells_at(x).iter().map(|c| (c.w, c.mass / d.px()[x])).collect(),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { kind, distributions, base, objectives, point_weights, clipped_odd_moments: false })
    }

    /// Multi-calibration over the distribution's feature groups.
    pub fn multicalibration(dist: TabularDistribution, grid: LevelGrid, opts: BuildOptions) -> Result<Self> {
        let groups = dist
            .feature_groups()
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("multi-calibration needs feature-defined groups".into()))?;
        let set = build_multicalib_objectives(&groups, grid, dist.k(), opts)?;
        Self::new(ProblemKind::Mc, vec![dist.clone()], dist, set)
    }

    /// Agnostic multi-calibration over the distribution's `u` groups.
    pub fn agnostic(dist: TabularDistribution, grid: LevelGrid, opts: BuildOptions) -> Result<Self> {
        let set = build_agnostic_objectives(dist.group_count(), grid, dist.k(), opts)?;
        Self::new(ProblemKind::Agnostic, vec![dist.clone()], dist, set)
    }

    /// Moment multi-calibration with moments up to degree `r`.
    pub fn moment(
        dist: TabularDistribution,
        grid: LevelGrid,
        r: u32,
        degrees: MomentDegrees,
        opts: BuildOptions,
    ) -> Result<Self> {
        if dist.k() != 2 {
            return Err(Error::InvalidConfig(format!("moment problems are binary, got k={}", dist.k())));
        }
        let set = build_moment_objectives(dist.group_count(), grid, r, degrees, opts)?;
        let mut p = Self::new(ProblemKind::Moment, vec![dist.clone()], dist, set)?;
        p.clipped_odd_moments = degrees.select(r).iter().any(|a| a % 2 == 1);
        Ok(p)
    }

    /// Conditional multi-calibration: one conditional law `D | i ∈ w` per
    /// group, with ungated objectives.
    pub fn conditional(dist: TabularDistribution, grid: LevelGrid, opts: BuildOptions) -> Result<Self> {
        let conditionals =
            (0..dist.group_count()).map(|i| dist.condition_on_group(i)).collect::<Result<Vec<_>>>()?;
        let set = build_conditional_objectives(grid, dist.k(), opts)?;
        Self::new(ProblemKind::Conditional, conditionals, dist, set)
    }

    /// Competitive problem over an amplified set (see
    /// [`super::amplify_competitive`]).
    pub fn competitive(dist: TabularDistribution, amplified: ObjectiveSet) -> Result<Self> {
        if amplified.baselines().is_none() {
            return Err(Error::InvalidConfig("competitive problems need an amplified objective set".into()));
        }
        Self::new(ProblemKind::Competitive, vec![dist.clone()], dist, amplified)
    }

    /// Problem kind.
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// The distributions (one per conditional law for conditional problems).
    pub fn distributions(&self) -> &[TabularDistribution] {
        &self.distributions
    }

    /// The unconditioned law.
    pub fn base(&self) -> &TabularDistribution {
        &self.base
    }

    /// Objective set.
    pub fn objectives(&self) -> &ObjectiveSet {
        &self.objectives
    }

    /// Prediction signature `(k, rows)`.
    pub fn signature(&self) -> Signature {
        self.objectives.signature()
    }

    /// Binning grid.
    pub fn grid(&self) -> LevelGrid {
        self.objectives.grid()
    }

    /// Domain size.
    pub fn domain_size(&self) -> usize {
        self.base.domain_size()
    }

    /// Number of components `b`.
    pub fn num_components(&self) -> usize {
        self.objectives.components().len()
    }

    /// Whether odd moments with clipped targets are present.
    pub fn clipped_odd_moments(&self) -> bool {
        self.clipped_odd_moments
    }

    /// Per-point distribution weights and membership laws.
    pub fn point_weights(&self, x: DomainPoint) -> &[PointWeight] {
        &self.point_weights[x]
    }

    /// Objective index range of component `c`.
    pub fn component_range(&self, c: usize) -> Range<usize> {
        self.objectives.components()[c].clone()
    }

    /// Adversary actions of component `c`: `(distribution, objective)` pairs.
    pub fn num_actions(&self, c: usize) -> usize {
        self.distributions.len() * self.component_range(c).len()
    }

    /// Decodes action `a` of component `c` into `(distribution, objective)`.
    pub fn action(&self, c: usize, a: usize) -> (usize, usize) {
        let r = self.component_range(c);
        (a / r.len(), r.start + a % r.len())
    }

    /// Encodes `(distribution, objective)` as an action of component `c`.
    pub fn action_index(&self, c: usize, d: usize, idx: usize) -> usize {
        let r = self.component_range(c);
        d * r.len() + (idx - r.start)
    }

    /// One sample from every distribution.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Sample> {
        self.distributions.iter().map(|d| d.sample(rng)).collect()
    }

    /// Exact losses of every objective, one map per distribution.
    pub fn exact_losses<H: Hypothesis + ?Sized>(&self, h: &H) -> Vec<SparseLosses> {
        self.distributions.iter().map(|d| self.objectives.exact_losses(h, d)).collect()
    }

    /// Exact worst action of component `c`: `((distribution, objective), loss)`.
    pub fn component_argmax(&self, losses: &[SparseLosses], c: usize) -> ((usize, usize), f64) {
        let range = self.component_range(c);
        let mut best: Option<((usize, usize), f64)> = None;
        for (d, l) in losses.iter().enumerate() {
            let (i, v) = l.argmax_in(range.clone());
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some(((d, i), v));
            }
        }
        best.expect("at least one distribution")
    }

    /// Exact multi-objective loss `max_{D, ℓ} L_{D,ℓ}(h)` with its witness.
    pub fn multi_objective_loss<H: Hypothesis + ?Sized>(&self, h: &H) -> ((usize, usize), f64) {
        let losses = self.exact_losses(h);
        (0..self.num_components())
            .map(|c| self.component_argmax(&losses, c))
            .fold(None, |best: Option<((usize, usize), f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .expect("at least one component")
    }

    /// Exact per-component maximum losses.
    pub fn component_losses<H: Hypothesis + ?Sized>(&self, h: &H) -> Vec<f64> {
        let losses = self.exact_losses(h);
        (0..self.num_components()).map(|c| self.component_argmax(&losses, c).1).collect()
    }

    /// Checks that a predictor matches the problem's signature and domain.
    pub fn check_predictor(&self, h: &DeterministicPredictor) -> Result<()> {
        if h.signature() != self.signature() || h.domain_size() != self.domain_size() {
            return Err(Error::SignatureMismatch {
                expected: format!("{} on {} points", self.signature(), self.domain_size()),
                found: format!("{} on {} points", h.signature(), h.domain_size()),
            });
        }
        Ok(())
    }
}
