//! Domain primitives: points, group memberships, the level grid, predictions
//! and the predictor types emitted by the dynamics drivers.
//!
//! A prediction holds `rows` probability vectors over `k` classes. Plain
//! multi-calibration uses one row; the moment problem uses a mean row followed
//! by one row per moment degree. Every constructor validates the simplex
//! invariant, so downstream code may assume it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a point in the finite feature space `X`.
pub type DomainPoint = usize;

/// Tolerance for the row-sum invariant of a [`Prediction`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Slack added before flooring a coordinate into a bin, so that grid values
/// computed in floating point (for example `3 * 0.1`) land in their own bin.
const BIN_EPSILON: f64 = 1e-9;

/// Membership vector `w` over at most 64 groups, stored as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupMask(pub u64);

impl GroupMask {
    /// Maximum number of groups a mask can index.
    pub const CAPACITY: usize = 64;

    /// Mask with no group set.
    pub const EMPTY: GroupMask = GroupMask(0);

    /// Mask containing exactly the listed groups.
    ///
    /// # Panics
    /// Panics if a group index is at least [`GroupMask::CAPACITY`].
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut bits = 0u64;
        for i in indices {
            assert!(i < Self::CAPACITY, "group index {i} exceeds mask capacity");
            bits |= 1 << i;
        }
        GroupMask(bits)
    }

    /// Whether group `i` is a member.
    #[inline]
    pub fn contains(self, i: usize) -> bool {
        i < Self::CAPACITY && (self.0 >> i) & 1 == 1
    }

    /// Number of groups set.
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Iterates the set group indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Set group indices as a vector.
    pub fn to_indices(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl Serialize for GroupMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_indices().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = indices.iter().find(|&&i| i >= Self::CAPACITY) {
            return Err(serde::de::Error::custom(format!(
                "group index {bad} exceeds the supported maximum of {} groups",
                Self::CAPACITY
            )));
        }
        Ok(GroupMask::from_indices(indices))
    }
}

/// A family of feature-defined groups `S ⊆ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFamily {
    domain_size: usize,
    groups: Vec<Vec<DomainPoint>>,
}

impl GroupFamily {
    /// Validates and builds a family over a domain of `domain_size` points.
    ///
    /// Every group must be nonempty and inside the domain, and there must be
    /// between one and 64 groups.
    pub fn new(domain_size: usize, groups: Vec<Vec<DomainPoint>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidGroups("a group family needs at least one group".into()));
        }
        if groups.len() > GroupMask::CAPACITY {
            return Err(Error::InvalidGroups(format!(
                "{} groups requested, at most {} supported",
                groups.len(),
                GroupMask::CAPACITY
            )));
        }
        let mut normalized = Vec::with_capacity(groups.len());
        for (i, mut g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidGroups(format!("group {i} is empty")));
            }
            if let Some(&x) = g.iter().find(|&&x| x >= domain_size) {
                return Err(Error::InvalidGroups(format!(
                    "group {i} contains point {x} outside the domain of size {domain_size}"
                )));
            }
            g.sort_unstable();
            g.dedup();
            normalized.push(g);
        }
        Ok(Self { domain_size, groups: normalized })
    }

    /// The family `{X}` containing only the whole domain.
    pub fn whole_domain(domain_size: usize) -> Result<Self> {
        Self::new(domain_size, vec![(0..domain_size).collect()])
    }

    /// Number of groups `|S|`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    /// Always false: the constructor rejects empty families.
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Size of the domain the family lives on.
    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Members of group `i`.
    pub fn group(&self, i: usize) -> &[DomainPoint] {
        &self.groups[i]
    }

    /// All groups.
    pub fn groups(&self) -> &[Vec<DomainPoint>] {
        &self.groups
    }

    /// Membership vector of point `x`.
    pub fn mask_of(&self, x: DomainPoint) -> GroupMask {
        GroupMask::from_indices(
            self.groups.iter().enumerate().filter(|(_, g)| g.binary_search(&x).is_ok()).map(|(i, _)| i),
        )
    }
}

/// The λ-discretization `V_λ = {0, λ, …, λ⌈1/λ⌉}` of `[0, 1]`.
///
/// Bins are half-open `[v, v + λ)`; a coordinate equal to the top of the
/// range falls into the last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid {
    lambda: f64,
    levels: usize,
}

impl LevelGrid {
    /// Grid of width `lambda ∈ (0, 1]`.
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidGrid(format!("bin width must lie in (0, 1], got {lambda}")));
        }
        let levels = (1.0 / lambda - BIN_EPSILON).ceil() as usize + 1;
        Ok(Self { lambda, levels })
    }

    /// Bin width λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of grid values `|V_λ| = ⌈1/λ⌉ + 1`, which is also the bin count.
    pub fn num_bins(&self) -> usize {
        self.levels
    }

    /// Left endpoint of bin `b`.
    pub fn value(&self, b: usize) -> f64 {
        b as f64 * self.lambda
    }

    /// Bin of a single coordinate value in `[0, 1]`.
    #[inline]
    pub fn bin(&self, c: f64) -> usize {
        let raw = (c / self.lambda + BIN_EPSILON).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.levels - 1)
        }
    }
}

/// Shape of a prediction: `rows` probability vectors over `k` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    /// Number of classes.
    pub k: usize,
    /// Number of rows (components and moment rows).
    pub rows: usize,
}

impl Signature {
    /// Signature with `k` classes and `rows` rows.
    pub fn new(k: usize, rows: usize) -> Self {
        Self { k, rows }
    }

    /// Total number of coordinates.
    pub fn len(&self) -> usize {
        self.k * self.rows
    }

    /// True when the signature has no coordinates.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(k={}, rows={})", self.k, self.rows)
    }
}

/// A prediction at one point: `rows` probability vectors of length `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Prediction {
    signature: Signature,
    values: Vec<f64>,
}

impl Prediction {
    /// Validates a row-major value table.
    pub fn new(signature: Signature, values: Vec<f64>) -> Result<Self> {
        if signature.k < 2 || signature.rows < 1 {
            return Err(Error::InvalidPrediction(format!(
                "signature {signature} needs k >= 2 and at least one row"
            )));
        }
        if values.len() != signature.len() {
            return Err(Error::InvalidPrediction(format!(
                "expected {} values for signature {signature}, got {}",
                signature.len(),
                values.len()
            )));
        }
        for (r, row) in values.chunks(signature.k).enumerate() {
            if let Some(v) = row.iter().find(|v| !(-ROW_SUM_TOLERANCE..=1.0 + ROW_SUM_TOLERANCE).contains(*v)) {
                return Err(Error::InvalidPrediction(format!("row {r} has coordinate {v} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidPrediction(format!("row {r} sums to {sum}, not 1")));
            }
        }
        Ok(Self { signature, values })
    }

    /// Builds a prediction from explicit rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidPrediction("rows have different lengths".into()));
        }
        let signature = Signature::new(k, rows.len());
        Self::new(signature, rows.into_iter().flatten().collect())
    }

    /// Single-row prediction.
    pub fn single(row: Vec<f64>) -> Result<Self> {
        Self::from_rows(vec![row])
    }

    /// Every row uniform `(1/k, …, 1/k)`.
    pub fn uniform(signature: Signature) -> Self {
        let v = 1.0 / signature.k as f64;
        Self { signature, values: vec![v; signature.len()] }
    }

    /// Builds a prediction whose rows are normalized copies of nonnegative
    /// weight vectors. Used where floating-point accumulation may drift.
    pub fn normalized(signature: Signature, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != signature.len() {
            return Err(Error::InvalidPrediction("wrong number of values".into()));
        }
        for row in values.chunks_mut(signature.k) {
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || row.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidPrediction("row weights must be nonnegative with a positive sum".into()));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Self::new(signature, values)
    }

    /// Signature of this prediction.
    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.signature.k;
        &self.values[i * k..(i + 1) * k]
    }

    /// All values in row-major order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bin of every coordinate, row-major.
    pub fn bins(&self, grid: &LevelGrid) -> Vec<usize> {
        bin_of(self, grid)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Prediction {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<Prediction> for Vec<Vec<f64>> {
    fn from(p: Prediction) -> Self {
        p.values.chunks(p.signature.k).map(<[f64]>::to_vec).collect()
    }
}

/// Bin index of every row-coordinate of `p`, in row-major order.
pub fn bin_of(p: &Prediction, grid: &LevelGrid) -> Vec<usize> {
    p.values.iter().map(|&c| grid.bin(c)).collect()
}

/// A deterministic predictor: one [`Prediction`] per domain point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicPredictor {
    signature: Signature,
    table: Vec<Prediction>,
}

impl DeterministicPredictor {
    /// Validates that every entry shares one signature.
    pub fn new(table: Vec<Prediction>) -> Result<Self> {
        let first = table.first().ok_or(Error::Empty("predictor table"))?;
        let signature = first.signature();
        if let Some(p) = table.iter().find(|p| p.signature() != signature) {
            return Err(Error::SignatureMismatch {
                expected: signature.to_string(),
                found: p.signature().to_string(),
            });
        }
        Ok(Self { signature, table })
    }

    /// The same prediction at every one of `domain_size` points.
    pub fn constant(domain_size: usize, p: Prediction) -> Self {
        Self { signature: p.signature(), table: vec![p; domain_size] }
    }

    /// Signature of every entry.
    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Number of domain points covered.
    pub fn domain_size(&self) -> usize {
        self.table.len()
    }

    /// Prediction at `x`.
    #[inline]
    pub fn at(&self, x: DomainPoint) -> &Prediction {
        &self.table[x]
    }

    /// The whole table.
    pub fn table(&self) -> &[Prediction] {
        &self.table
    }

    /// Replaces the prediction at `x`.
    ///
    /// # Panics
    /// Panics on a signature mismatch.
    pub fn set(&mut self, x: DomainPoint, p: Prediction) {
        assert_eq!(p.signature(), self.signature, "prediction signature must match the predictor");
        self.table[x] = p;
    }

    /// Stacks single-component predictors into one multi-row predictor.
    pub fn stack(parts: &[&DeterministicPredictor]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("predictor parts"))?;
        let k = first.signature.k;
        let n = first.domain_size();
        if parts.iter().any(|p| p.signature.k != k || p.domain_size() != n) {
            return Err(Error::InvalidPrediction("stacked predictors must share k and domain".into()));
        }
        let rows: usize = parts.iter().map(|p| p.signature.rows).sum();
        let signature = Signature::new(k, rows);
        let table = (0..n)
            .map(|x| Prediction {
                signature,
                values: parts.iter().flat_map(|p| p.at(x).values().iter().copied()).collect(),
            })
            .collect();
        Ok(Self { signature, table })
    }

    /// Extracts rows `start..start + len` as a new predictor.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        let k = self.signature.k;
        let signature = Signature::new(k, len);
        let table = self
            .table
            .iter()
            .map(|p| Prediction { signature, values: p.values[start * k..(start + len) * k].to_vec() })
            .collect();
        Self { signature, table }
    }
}

/// A weighted mixture of deterministic predictors (a randomized hypothesis).
pub trait Hypothesis {
    /// Shared signature of every member.
    fn signature(&self) -> Signature;
    /// Domain size shared by every member.
    fn domain_size(&self) -> usize;
    /// `(weight, member)` pairs; weights sum to one.
    fn weighted_members(&self) -> Vec<(f64, &DeterministicPredictor)>;
}

impl Hypothesis for DeterministicPredictor {
    fn signature(&self) -> Signature {
        self.signature
    }
    fn domain_size(&self) -> usize {
        self.table.len()
    }
    fn weighted_members(&self) -> Vec<(f64, &DeterministicPredictor)> {
        vec![(1.0, self)]
    }
}

/// Uniform mixture over deterministic predictors, as returned by the
/// no-regret-vs-no-regret driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePredictor {
    members: Vec<DeterministicPredictor>,
}

impl EnsemblePredictor {
    /// Validates that members are nonempty and share signature and domain.
    pub fn new(members: Vec<DeterministicPredictor>) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("ensemble members"))?;
        let (sig, n) = (first.signature(), first.domain_size());
        if let Some(m) = members.iter().find(|m| m.signature() != sig || m.domain_size() != n) {
            return Err(Error::SignatureMismatch {
                expected: format!("{sig} on {n} points"),
                found: format!("{} on {} points", m.signature(), m.domain_size()),
            });
        }
        Ok(Self { members })
    }

    /// Members in play order.
    pub fn members(&self) -> &[DeterministicPredictor] {
        &self.members
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Always false: the constructor rejects empty ensembles.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Hypothesis for EnsemblePredictor {
    fn signature(&self) -> Signature {
        self.members[0].signature()
    }
    fn domain_size(&self) -> usize {
        self.members[0].domain_size()
    }
    fn weighted_members(&self) -> Vec<(f64, &DeterministicPredictor)> {
        let w = 1.0 / self.members.len() as f64;
        self.members.iter().map(|m| (w, m)).collect()
    }
}

/// Non-uniform mixture over deterministic predictors, as produced when the
/// learner runs Hedge over an explicit finite hypothesis class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePredictor {
    members: Vec<DeterministicPredictor>,
    weights: Vec<f64>,
}

impl MixturePredictor {
    /// Validates weights (nonnegative, summing to one) and member shapes.
    pub fn new(members: Vec<DeterministicPredictor>, weights: Vec<f64>) -> Result<Self> {
        EnsemblePredictor::new(members.clone())?;
        if weights.len() != members.len() {
            return Err(Error::InvalidPrediction("one weight per member required".into()));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPrediction(format!("mixture weights must be a distribution (sum {sum})")));
        }
        Ok(Self { members, weights })
    }

    /// Members.
    pub fn members(&self) -> &[DeterministicPredictor] {
        &self.members
    }

    /// Mixture weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Hypothesis for MixturePredictor {
    fn signature(&self) -> Signature {
        self.members[0].signature()
    }
    fn domain_size(&self) -> usize {
        self.members[0].domain_size()
    }
    fn weighted_members(&self) -> Vec<(f64, &DeterministicPredictor)> {
        self.weights.iter().copied().zip(self.members.iter()).filter(|(w, _)| *w > 0.0).collect()
    }
}

/// One draw `z = (x, w, y)` from a tabular distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    /// Feature point.
    pub x: DomainPoint,
    /// Group-membership vector.
    pub w: GroupMask,
    /// Class label in `0..k`.
    pub y: usize,
}
