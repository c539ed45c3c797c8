//! Finite joint laws over `(x, w, y)` with exact expectations and seeded
//! sampling.
//!
//! A [`TabularDistribution`] is a list of *cells* `(x, w)` carrying a mass
//! `P(x, w)` and a categorical label law `P(y | x, w)`. Feature-derived
//! groups give one cell per point (the membership vector is a function of
//! `x`); identity groups give several cells per point.
//!
//! The structured-text schema ([`DistributionSpec`]) declares `k`, `u` and
//! `domain_size` explicitly and accepts either
//! * `groups` (lists of domain points) plus a per-point `label_law`, or
//! * a per-point `group_law`: lists of `{ "w": [...], "p": P(w | x),
//!   "label_law": [...] }` entries, where an entry may omit its label law to
//!   inherit the per-point `label_law`.

use std::ops::Range;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DeterministicPredictor, DomainPoint, GroupFamily, GroupMask, Prediction, Sample, Signature};
use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Seeded generator used by every randomized component.
pub type SeededRng = ChaCha8Rng;

/// Generator seeded from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One `(x, w)` cell of a tabular law.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Feature point.
    pub x: DomainPoint,
    /// Membership vector.
    pub w: GroupMask,
    /// Joint mass `P(x, w)`.
    pub mass: f64,
    /// Conditional label law `P(y | x, w)`.
    pub label_law: Vec<f64>,
}

/// One support atom `(x, w, y)` with its joint probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// The sample.
    pub sample: Sample,
    /// `P(x, w, y)`.
    pub prob: f64,
}

/// A finite joint law over feature points, membership vectors and labels.
#[derive(Debug, Clone)]
pub struct TabularDistribution {
    k: usize,
    u: usize,
    px: Vec<f64>,
    cells: Vec<Cell>,
    cells_by_x: Vec<Range<usize>>,
    atoms: Vec<Atom>,
    sampler: WeightedIndex<f64>,
    feature_groups: Option<GroupFamily>,
}

fn check_law(what: &str, law: &[f64], len: usize) -> Result<()> {
    if law.len() != len {
        return Err(Error::InvalidDistribution(format!("{what} has {} entries, expected {len}", law.len())));
    }
    if let Some(p) = law.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("{what} has invalid probability {p}")));
    }
    let sum: f64 = law.iter().sum();
    if (sum - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TabularDistribution {
    /// Law with feature-derived groups: `w = mask_of(x)` deterministically.
    pub fn from_features(px: Vec<f64>, groups: GroupFamily, label_law: Vec<Vec<f64>>) -> Result<Self> {
        let n = px.len();
        if groups.domain_size() != n {
            return Err(Error::InvalidDistribution(format!(
                "group family covers {} points but px has {n}",
                groups.domain_size()
            )));
        }
        if label_law.len() != n {
            return Err(Error::InvalidDistribution(format!("label_law has {} rows, expected {n}", label_law.len())));
        }
        let k = label_law.first().map(Vec::len).unwrap_or(0);
        let membership = (0..n)
            .map(|x| vec![(groups.mask_of(x), 1.0, label_law[x].clone())])
            .collect();
        let mut dist = Self::from_membership(k, groups.len(), px, membership)?;
        dist.feature_groups = Some(groups);
        Ok(dist)
    }

    /// General law: for each point, a list of `(w, P(w | x), P(y | x, w))`.
    pub fn from_membership(
        k: usize,
        u: usize,
        px: Vec<f64>,
        membership: Vec<Vec<(GroupMask, f64, Vec<f64>)>>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidDistribution(format!("k must be at least 2, got {k}")));
        }
        if u == 0 || u > GroupMask::CAPACITY {
            return Err(Error::InvalidDistribution(format!("group count u must be in 1..=64, got {u}")));
        }
        if px.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        check_law("px", &px, px.len())?;
        if membership.len() != px.len() {
            return Err(Error::InvalidDistribution(format!(
                "membership law has {} rows, expected {}",
                membership.len(),
                px.len()
            )));
        }
        let mut cells = Vec::new();
        let mut cells_by_x = Vec::with_capacity(px.len());
        for (x, entries) in membership.into_iter().enumerate() {
            let start = cells.len();
            let probs: Vec<f64> = entries.iter().map(|e| e.1).collect();
            check_law(&format!("group law at x={x}"), &probs, probs.len())?;
            for (w, p, law) in entries {
                if w.iter().any(|i| i >= u) {
                    return Err(Error::InvalidDistribution(format!(
                        "membership vector at x={x} names a group outside 0..{u}"
                    )));
                }
                check_law(&format!("label law at x={x}"), &law, k)?;
                cells.push(Cell { x, w, mass: px[x] * p, label_law: law });
            }
            cells_by_x.push(start..cells.len());
        }
        let mut atoms = Vec::new();
        for c in &cells {
            for (y, &py) in c.label_law.iter().enumerate() {
                let prob = c.mass * py;
                if prob > 0.0 {
                    atoms.push(Atom { sample: Sample { x: c.x, w: c.w, y }, prob });
                }
            }
        }
        let sampler = WeightedIndex::new(atoms.iter().map(|a| a.prob))
            .map_err(|e| Error::InvalidDistribution(format!("cannot build sampler: {e}")))?;
        Ok(Self { k, u, px, cells, cells_by_x, atoms, sampler, feature_groups: None })
    }

    /// Parses the structured-text schema.
    pub fn from_spec(spec: DistributionSpec) -> Result<Self> {
        spec.build()
    }

    /// Reads a distribution file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parses a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DistributionSpec = serde_json::from_str(text)?;
        spec.build()
    }

    /// Serializable form.
    pub fn to_spec(&self) -> DistributionSpec {
        let group_law = if self.feature_groups.is_some() {
            None
        } else {
            Some(
                self.cells_by_x
                    .iter()
                    .enumerate()
                    .map(|(x, r)| {
                        self.cells[r.clone()]
                            .iter()
                            .map(|c| MembershipEntry {
                                w: c.w,
                                p: if self.px[x] > 0.0 { c.mass / self.px[x] } else { 0.0 },
                                label_law: Some(c.label_law.clone()),
                            })
                            .collect()
                    })
                    .collect(),
            )
        };
        DistributionSpec {
            k: self.k,
            u: self.u,
            domain_size: self.px.len(),
            px: self.px.clone(),
            groups: self.feature_groups.as_ref().map(|g| g.groups().to_vec()),
            label_law: self
                .feature_groups
                .as_ref()
                .map(|_| self.cells.iter().map(|c| c.label_law.clone()).collect()),
            group_law,
        }
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of groups `u` (length of membership vectors).
    pub fn group_count(&self) -> usize {
        self.u
    }

    /// Domain size `|X|`.
    pub fn domain_size(&self) -> usize {
        self.px.len()
    }

    /// Marginal `P(x)`.
    pub fn px(&self) -> &[f64] {
        &self.px
    }

    /// All `(x, w)` cells.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Cells at point `x`.
    pub fn cells_at(&self, x: DomainPoint) -> &[Cell] {
        &self.cells[self.cells_by_x[x].clone()]
    }

    /// Positive-probability atoms `(x, w, y)`.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// The feature group family, when groups are functions of `x`.
    pub fn feature_groups(&self) -> Option<&GroupFamily> {
        self.feature_groups.as_ref()
    }

    /// Points with positive mass.
    pub fn support(&self) -> impl Iterator<Item = DomainPoint> + '_ {
        self.px.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(x, _)| x)
    }

    /// `P(i ∈ w)`.
    pub fn group_mass(&self, i: usize) -> f64 {
        self.cells.iter().filter(|c| c.w.contains(i)).map(|c| c.mass).sum()
    }

    /// Draws one sample `z ~ D`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        self.atoms[self.sampler.sample(rng)].sample
    }

    /// Draws `n` i.i.d. samples.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Sample> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Exact `E[f(z)]` as a weighted sum over the support.
    pub fn exact_expectation<F: FnMut(&Sample) -> f64>(&self, mut f: F) -> f64 {
        self.atoms.iter().map(|a| a.prob * f(&a.sample)).sum()
    }

    /// `D | i ∈ w`, by exact renormalization of the cells containing group `i`.
    pub fn condition_on_group(&self, i: usize) -> Result<Self> {
        let mass = self.group_mass(i);
        if !(mass > 0.0) {
            return Err(Error::ZeroMassGroup(i));
        }
        let mut px = vec![0.0; self.px.len()];
        for c in self.cells.iter().filter(|c| c.w.contains(i)) {
            px[c.x] += c.mass / mass;
        }
        let membership: Vec<Vec<(GroupMask, f64, Vec<f64>)>> = (0..self.px.len())
            .map(|x| {
                let kept: Vec<&Cell> = self.cells_at(x).iter().filter(|c| c.w.contains(i)).collect();
                let total: f64 = kept.iter().map(|c| c.mass).sum();
                if total > 0.0 {
                    kept.iter().map(|c| (c.w, c.mass / total, c.label_law.clone())).collect()
                } else {
                    // Zero-mass point: keep its membership law so the point stays defined.
                    self.cells_at(x).iter().map(|c| (c.w, self.conditional_w(c), c.label_law.clone())).collect()
                }
            })
            .collect();
        // Renormalized masses can drift from one by rounding; fold the drift into the largest entry.
        let px = renormalize(px);
        let mut dist = Self::from_membership(self.k, self.u, px, membership)?;
        dist.feature_groups = self.feature_groups.clone();
        Ok(dist)
    }

    fn conditional_w(&self, c: &Cell) -> f64 {
        let r = &self.cells_by_x[c.x];
        let n = r.len() as f64;
        if self.px[c.x] > 0.0 {
            c.mass / self.px[c.x]
        } else {
            1.0 / n
        }
    }

    /// `E[g(y) | x]` for every point, as a single-row predictor (the Bayes
    /// predictor of the marginal law over `x`).
    pub fn bayes_predictor(&self) -> DeterministicPredictor {
        let sig = Signature::new(self.k, 1);
        let table = (0..self.px.len())
            .map(|x| {
                let mut mean = vec![0.0; self.k];
                let cells = self.cells_at(x);
                for c in cells {
                    let weight = self.conditional_w(c);
                    for (m, p) in mean.iter_mut().zip(&c.label_law) {
                        *m += weight * p;
                    }
                }
                Prediction::normalized(sig, mean).unwrap_or_else(|_| Prediction::uniform(sig))
            })
            .collect();
        DeterministicPredictor::new(table).expect("uniform signature by construction")
    }
}

fn renormalize(mut p: Vec<f64>) -> Vec<f64> {
    let sum: f64 = p.iter().sum();
    if let Some((imax, _)) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        p[imax] += 1.0 - sum;
    }
    p
}

/// Per-point membership entry of the structured-text schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipEntry {
    /// Groups the sample belongs to.
    pub w: GroupMask,
    /// `P(w | x)`.
    pub p: f64,
    /// `P(y | x, w)`; inherits the per-point `label_law` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_law: Option<Vec<f64>>,
}

/// Structured-text schema of a tabular distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    /// Number of classes.
    pub k: usize,
    /// Number of groups.
    pub u: usize,
    /// Domain size `|X|`.
    pub domain_size: usize,
    /// Marginal `P(x)`.
    pub px: Vec<f64>,
    /// Feature groups as lists of domain points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<DomainPoint>>>,
    /// Per-point label law `P(y | x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_law: Option<Vec<Vec<f64>>>,
    /// Per-point membership law (identity groups).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_law: Option<Vec<Vec<MembershipEntry>>>,
}

impl DistributionSpec {
    /// Validates the document and builds the distribution.
    pub fn build(self) -> Result<TabularDistribution> {
        if self.px.len() != self.domain_size {
            return Err(Error::InvalidDistribution(format!(
                "px has {} entries but domain_size is {}",
                self.px.len(),
                self.domain_size
            )));
        }
        let dist = match (self.groups, self.group_law) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidDistribution("give either groups or group_law, not both".into()))
            }
            (Some(groups), None) => {
                if groups.len() != self.u {
                    return Err(Error::InvalidDistribution(format!(
                        "groups lists {} groups but u is {}",
                        groups.len(),
                        self.u
                    )));
                }
                let label_law = self
                    .label_law
                    .ok_or_else(|| Error::InvalidDistribution("feature groups require label_law".into()))?;
                let family = GroupFamily::new(self.domain_size, groups)?;
                TabularDistribution::from_features(self.px, family, label_law)?
            }
            (None, Some(law)) => {
                if law.len() != self.domain_size {
                    return Err(Error::InvalidDistribution(format!(
                        "group_law has {} rows, expected {}",
                        law.len(),
                        self.domain_size
                    )));
                }
                let mut membership = Vec::with_capacity(law.len());
                for (x, entries) in law.into_iter().enumerate() {
                    let mut row = Vec::with_capacity(entries.len());
                    for e in entries {
                        let label = match (e.label_law, self.label_law.as_ref()) {
                            (Some(l), _) => l,
                            (None, Some(per_x)) => per_x.get(x).cloned().ok_or_else(|| {
                                Error::InvalidDistribution(format!("label_law has no row for x={x}"))
                            })?,
                            (None, None) => {
                                return Err(Error::InvalidDistribution(format!(
                                    "group_law entry at x={x} has no label_law and no per-point fallback"
                                )))
                            }
                        };
                        row.push((e.w, e.p, label));
                    }
                    membership.push(row);
                }
                TabularDistribution::from_membership(self.k, self.u, self.px, membership)?
            }
            (None, None) => {
                return Err(Error::InvalidDistribution("one of groups or group_law is required".into()))
            }
        };
        if dist.k() != self.k {
            return Err(Error::InvalidDistribution(format!(
                "label laws have {} classes but k is {}",
                dist.k(),
                self.k
            )));
        }
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> TabularDistribution {
        let fam = GroupFamily::whole_domain(2).unwrap();
        TabularDistribution::from_features(vec![0.5, 0.5], fam, vec![vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap()
    }

    #[test]
    fn point_mass_always_returns_its_sample() {
        let d = TabularDistribution::from_membership(
            2,
            1,
            vec![1.0],
            vec![vec![(GroupMask::from_indices([0]), 1.0, vec![0.0, 1.0])]],
        )
        .unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), Sample { x: 0, w: GroupMask::from_indices([0]), y: 1 });
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let d = two_point();
        let a = d.sample_n(500, &mut seeded_rng(11));
        let b = d.sample_n(500, &mut seeded_rng(11));
        assert_eq!(a, b);
    }

    #[test]
    fn expectation_of_constant_and_indicator() {
        let fam = GroupFamily::whole_domain(4).unwrap();
        let d = TabularDistribution::from_features(vec![0.25; 4], fam, vec![vec![0.5, 0.5]; 4]).unwrap();
        assert!((d.exact_expectation(|_| 1.0) - 1.0).abs() < 1e-15);
        assert!((d.exact_expectation(|z| (z.x == 0) as u8 as f64) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn conditioning_rescales_masses_exactly() {
        let fam = GroupFamily::new(3, vec![vec![0], vec![0, 1, 2]]).unwrap();
        let d = TabularDistribution::from_features(vec![0.2, 0.5, 0.3], fam, vec![vec![0.5, 0.5]; 3]).unwrap();
        let c = d.condition_on_group(0).unwrap();
        assert_eq!(c.px(), &[1.0, 0.0, 0.0]);
        let whole = d.condition_on_group(1).unwrap();
        assert_eq!(whole.px(), d.px());
    }

    #[test]
    fn zero_mass_group_is_an_error() {
        let fam = GroupFamily::new(2, vec![vec![0], vec![1]]).unwrap();
        let d = TabularDistribution::from_features(vec![1.0, 0.0], fam, vec![vec![0.5, 0.5]; 2]).unwrap();
        assert!(matches!(d.condition_on_group(1), Err(Error::ZeroMassGroup(1))));
    }

    #[test]
    fn schema_roundtrip_for_both_layouts() {
        let d = two_point();
        let back = TabularDistribution::from_spec(d.to_spec()).unwrap();
        assert_eq!(back.atoms(), d.atoms());

        let text = r#"{
            "k": 2, "u": 2, "domain_size": 1, "px": [1.0],
            "label_law": [[0.5, 0.5]],
            "group_law": [[{"w": [0], "p": 0.5, "label_law": [0.9, 0.1]}, {"w": [1], "p": 0.5}]]
        }"#;
        let d = TabularDistribution::from_json(text).unwrap();
        assert_eq!(d.cells().len(), 2);
        assert_eq!(d.cells()[1].label_law, vec![0.5, 0.5]);
        let back = TabularDistribution::from_spec(d.to_spec()).unwrap();
        assert_eq!(back.atoms(), d.atoms());
    }

    #[test]
    fn schema_rejects_bad_mass() {
        let text = r#"{"k": 2, "u": 1, "domain_size": 2, "px": [0.5, 0.6],
                       "groups": [[0, 1]], "label_law": [[0.5, 0.5], [0.5, 0.5]]}"#;
        assert!(TabularDistribution::from_json(text).is_err());
    }
}
