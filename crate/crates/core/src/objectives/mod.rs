//! Linear calibration objectives and the sets built from them.
//!
//! Every objective has the form
//! `ℓ(h, z) = sign · gate(h, x, w) · (h(x)_row − target(y))_coord`,
//! where the gate multiplies group membership (read from the sample's
//! membership vector) with bin-equality indicators on one or more rows of
//! the prediction. Sets are sign-closed: for every objective, its negation
//! is also a member, so the maximum over the set is the absolute violation.
//!
//! Structured sets are stored *implicitly*: an objective index decodes
//! arithmetically into its descriptor, and the open objectives at a point
//! are enumerated directly from the point's bins. A set with billions of
//! members (say, sixteen classes on a coarse grid) therefore costs no memory;
//! only players that keep per-objective state (the Hedge adversary) need a
//! set small enough to enumerate.

mod problem;

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::distribution::TabularDistribution;
use crate::domain::{DeterministicPredictor, DomainPoint, GroupMask, Hypothesis, LevelGrid, Prediction, Sample, Signature};
use crate::error::{Error, Result};

pub use problem::{MultiObjectiveProblem, PointWeight, ProblemKind};

/// Default cap on the number of objectives a constructor may declare.
pub const DEFAULT_SIZE_CAP: u128 = 1_000_000;

/// Sign of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    /// `+1`.
    #[serde(rename = "+")]
    Plus,
    /// `−1`.
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    /// The sign as a real factor.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Opposite sign.
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn from_bit(bit: usize) -> Sign {
        if bit == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Family an objective belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Calibration of a mean row against one-hot labels, gated on a
    /// feature-defined group.
    Mean,
    /// Calibration of a moment row against the centered moment
    /// `(y − h_mean(x))^degree` of the label.
    Moment {
        /// Moment degree `a`.
        degree: u32,
    },
    /// Mean calibration gated on an identity group read from the sample.
    Agnostic,
    /// Mean calibration without a group gate, evaluated on conditional laws.
    Conditional,
    /// Baseline-subtracted objective `ℓ(h) − ℓ(h′)` against baseline `h′`.
    Competitive {
        /// Index of the baseline predictor.
        baseline: usize,
    },
}

/// Bin-equality gate on one prediction row.
///
/// `bins` has one entry per class coordinate (`k` entries), or a single
/// entry gating only the first coordinate (binary problems, where the row
/// is determined by its first coordinate).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinGate {
    /// Gated row.
    pub row: usize,
    /// Required bin of each gated coordinate.
    pub bins: Vec<usize>,
}

/// Descriptor of one linear objective.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearObjective {
    /// Objective family.
    pub kind: ObjectiveKind,
    /// Component (player) the objective belongs to.
    pub component: usize,
    /// Group whose membership gates the objective, if any.
    pub group: Option<usize>,
    /// Bin gates; always includes the scored row.
    pub gates: Vec<BinGate>,
    /// Row whose coordinate is scored.
    pub row: usize,
    /// Scored class coordinate `j`.
    pub coord: usize,
    /// Sign.
    pub sign: Sign,
    /// Moment degree of moment objectives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_degree: Option<u32>,
}

/// What the scored coordinate is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// The one-hot label embedding `g(y)`.
    OneHot,
    /// `(c, 1 − c)` with `c = clip((y_1 − mean)^degree)`, where `y_1` is the
    /// indicator of the first class and `mean` the mean row's first coordinate.
    CenteredMoment {
        /// Degree `a`.
        degree: u32,
        /// Mean prediction `h_mean(x)_1`.
        mean: f64,
    },
}

impl Target {
    /// Target value of coordinate `j` for label `y`.
    #[inline]
    pub fn value(&self, j: usize, y: usize) -> f64 {
        match *self {
            Target::OneHot => (y == j) as u8 as f64,
            Target::CenteredMoment { degree, mean } => {
                let y1 = (y == 0) as u8 as f64;
                let c = (y1 - mean).powi(degree as i32).clamp(0.0, 1.0);
                if j == 0 {
                    c
                } else {
                    1.0 - c
                }
            }
        }
    }
}

/// An objective that is open (gate on) at a point, as reported to players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenTerm {
    /// Objective index.
    pub index: usize,
    /// Scored coordinate.
    pub coord: usize,
    /// Sign as a factor.
    pub sign: f64,
    /// Target the coordinate is compared against.
    pub target: Target,
}

impl OpenTerm {
    /// Loss of scored value `p_coord` against label `y`.
    #[inline]
    pub fn value(&self, p_coord: f64, y: usize) -> f64 {
        self.sign * (p_coord - self.target.value(self.coord, y))
    }
}

/// Which moment degrees a moment set includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentDegrees {
    /// Even degrees `a ∈ {2, 4, …} ∩ [r]` only.
    #[default]
    Even,
    /// Every degree `a ∈ [r]`; odd targets are clipped to `[0, 1]`.
    All,
}

impl MomentDegrees {
    /// Degrees selected from `1..=r`.
    pub fn select(self, r: u32) -> Vec<u32> {
        (1..=r).filter(|a| self == MomentDegrees::All || a % 2 == 0).collect()
    }
}

/// Options shared by set constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Maximum number of objectives a set may declare.
    pub size_cap: u128,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { size_cap: DEFAULT_SIZE_CAP }
    }
}

#[derive(Debug, Clone)]
struct CalibrationLayout {
    kind: ObjectiveKind,
    /// Number of gating groups; `None` for ungated sets.
    groups: Option<usize>,
    k: usize,
    codes: usize,
}

#[derive(Debug, Clone)]
struct MomentLayout {
    groups: usize,
    bins: usize,
    degrees: Vec<u32>,
    half: usize,
}

#[derive(Debug, Clone)]
struct ExplicitLayout {
    objectives: Vec<LinearObjective>,
    /// Gate width (number of gated coordinates) of the scored row, per row.
    widths: Vec<usize>,
    buckets: HashMap<(usize, usize), Vec<usize>>,
}

#[derive(Debug, Clone)]
struct AmplifiedLayout {
    base: Box<ObjectiveSet>,
    baselines: Vec<DeterministicPredictor>,
}

#[derive(Debug, Clone)]
enum Layout {
    Calibration(CalibrationLayout),
    Moment(MomentLayout),
    Explicit(ExplicitLayout),
    Amplified(AmplifiedLayout),
}

/// An indexed, immutable set of linear objectives.
#[derive(Debug, Clone)]
pub struct ObjectiveSet {
    layout: Layout,
    grid: LevelGrid,
    signature: Signature,
    components: Vec<Range<usize>>,
    component_rows: Vec<Range<usize>>,
    len: usize,
    sign_closed: bool,
    permutation_closed: bool,
    scale: f64,
}

fn checked_size(what: &'static str, factors: &[u128], cap: u128) -> Result<usize> {
    let mut total: u128 = 1;
    for &f in factors {
        total = total.saturating_mul(f);
    }
    if total > cap || total > usize::MAX as u128 {
        return Err(Error::SizeCap {
            what,
            requested: total,
            cap,
            hint: "use a coarser grid width, fewer groups or classes, or raise the size cap",
        });
    }
    Ok(total as usize)
}

fn checked_pow(base: usize, exp: usize) -> u128 {
    let mut v: u128 = 1;
    for _ in 0..exp {
        v = v.saturating_mul(base as u128);
    }
    v
}

/// Mixed-radix code of a row's bins, first coordinate most significant.
#[inline]
fn full_code(grid: &LevelGrid, row: &[f64]) -> usize {
    let nb = grid.num_bins();
    row.iter().fold(0usize, |acc, &c| acc * nb + grid.bin(c))
}

fn decode_code(mut code: usize, nb: usize, width: usize) -> Vec<usize> {
    let mut bins = vec![0; width];
    for slot in bins.iter_mut().rev() {
        *slot = code % nb;
        code /= nb;
    }
    bins
}

fn encode_bins(bins: &[usize], nb: usize) -> usize {
    bins.iter().fold(0, |acc, &b| acc * nb + b)
}

/// Builds the sign-closed multi-calibration set: objectives for every
/// `(group, bin vector, coordinate, sign)`, of size `2·|S|·|V_λ|^k·k`.
pub fn build_multicalib_objectives(
    groups: &crate::domain::GroupFamily,
    grid: LevelGrid,
    k: usize,
    opts: BuildOptions,
) -> Result<ObjectiveSet> {
    if groups.is_empty() {
        return Err(Error::InvalidGroups("a group family needs at least one group".into()));
    }
    calibration_set(ObjectiveKind::Mean, Some(groups.len()), grid, k, opts)
}

/// Builds the agnostic set over `u` identity groups; gates read `i ∈ w`
/// from the sample.
pub fn build_agnostic_objectives(u: usize, grid: LevelGrid, k: usize, opts: BuildOptions) -> Result<ObjectiveSet> {
    if u == 0 {
        return Err(Error::InvalidGroups("agnostic sets need at least one group".into()));
    }
    calibration_set(ObjectiveKind::Agnostic, Some(u), grid, k, opts)
}

/// Builds the ungated set used on each conditional law.
pub fn build_conditional_objectives(grid: LevelGrid, k: usize, opts: BuildOptions) -> Result<ObjectiveSet> {
    calibration_set(ObjectiveKind::Conditional, None, grid, k, opts)
}

fn calibration_set(
    kind: ObjectiveKind,
    groups: Option<usize>,
    grid: LevelGrid,
    k: usize,
    opts: BuildOptions,
) -> Result<ObjectiveSet> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    if groups.is_some_and(|u| u > GroupMask::CAPACITY) {
        return Err(Error::InvalidGroups("at most 64 groups are supported".into()));
    }
    let codes = checked_pow(grid.num_bins(), k);
    let len = checked_size(
        "objective set",
        &[2, groups.unwrap_or(1) as u128, codes, k as u128],
        opts.size_cap,
    )?;
    Ok(ObjectiveSet {
        layout: Layout::Calibration(CalibrationLayout { kind, groups, k, codes: codes as usize }),
        grid,
        signature: Signature::new(k, 1),
        components: vec![0..len],
        component_rows: vec![0..1],
        len,
        sign_closed: true,
        permutation_closed: k == 2,
        scale: 1.0,
    })
}

/// Builds the binary mean-conditioned moment sets. Row 0 is the mean row;
/// row `1 + i` holds the moment of degree `degrees[i]`. Component 0 (the
/// mean player) holds objectives gated on `(group, mean bin, moment-row
/// bin)` for every selected degree; component 1 holds the matching moment
/// objectives with centered-moment targets.
pub fn build_moment_objectives(
    u: usize,
    grid: LevelGrid,
    r: u32,
    degrees: MomentDegrees,
    opts: BuildOptions,
) -> Result<ObjectiveSet> {
    if r < 2 {
        return Err(Error::InvalidConfig(format!("moment problems need r >= 2, got {r}")));
    }
    if u == 0 || u > GroupMask::CAPACITY {
        return Err(Error::InvalidGroups(format!("group count must be in 1..=64, got {u}")));
    }
    let degrees = degrees.select(r);
    let nb = grid.num_bins();
    let half = checked_size(
        "moment objective component",
        &[2, u as u128, nb as u128, nb as u128, 2, degrees.len() as u128],
        opts.size_cap,
    )?;
    checked_size("moment objective set", &[2, half as u128], opts.size_cap)?;
    let rows = 1 + degrees.len();
    Ok(ObjectiveSet {
        layout: Layout::Moment(MomentLayout { groups: u, bins: nb, degrees, half }),
        grid,
        signature: Signature::new(2, rows),
        components: vec![0..half, half..2 * half],
        component_rows: vec![0..1, 1..rows],
        len: 2 * half,
        sign_closed: true,
        permutation_closed: true,
        scale: 1.0,
    })
}

/// Amplifies a set against a list of baselines: one objective per
/// `(ℓ, h′)` with value `(ℓ(h, z) − ℓ(h′, z)) / 2`.
pub fn amplify_competitive(set: &ObjectiveSet, baselines: Vec<DeterministicPredictor>) -> Result<ObjectiveSet> {
    if baselines.is_empty() {
        return Err(Error::Empty("baseline list"));
    }
    if let Some(b) = baselines.iter().find(|b| b.signature() != set.signature) {
        return Err(Error::SignatureMismatch { expected: set.signature.to_string(), found: b.signature().to_string() });
    }
    if set.components.len() != 1 || !set.supports_row_visits() {
        return Err(Error::Unsupported("competitive amplification of multi-component or amplified sets".into()));
    }
    let h = baselines.len();
    let len = set.len.checked_mul(h).ok_or(Error::SizeCap {
        what: "amplified set",
        requested: set.len as u128 * h as u128,
        cap: usize::MAX as u128,
        hint: "use fewer baselines",
    })?;
    Ok(ObjectiveSet {
        layout: Layout::Amplified(AmplifiedLayout { base: Box::new(set.clone()), baselines }),
        grid: set.grid,
        signature: set.signature,
        components: vec![0..len],
        component_rows: set.component_rows.clone(),
        len,
        sign_closed: false,
        permutation_closed: false,
        scale: 0.5,
    })
}

impl ObjectiveSet {
    /// Builds an explicit set from descriptors. Every objective must gate
    /// its scored row, and all objectives scoring one row must gate it with
    /// the same width.
    pub fn from_objectives(
        objectives: Vec<LinearObjective>,
        grid: LevelGrid,
        signature: Signature,
    ) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::Empty("objective list"));
        }
        let mut widths = vec![0usize; signature.rows];
        let mut buckets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let ncomp = objectives.iter().map(|o| o.component).max().unwrap_or(0) + 1;
        let mut comp_rows: Vec<Option<Range<usize>>> = vec![None; ncomp];
        for (i, o) in objectives.iter().enumerate() {
            if matches!(o.kind, ObjectiveKind::Competitive { .. }) {
                return Err(Error::Unsupported("explicit sets of competitive objectives".into()));
            }
            if o.row >= signature.rows || o.coord >= signature.k {
                return Err(Error::SignatureMismatch {
                    expected: signature.to_string(),
                    found: format!("objective scoring row {} coordinate {}", o.row, o.coord),
                });
            }
            let own = o
                .gates
                .iter()
                .find(|g| g.row == o.row)
                .ok_or_else(|| Error::InvalidConfig(format!("objective {i} does not gate its scored row")))?;
            if own.bins.len() != 1 && own.bins.len() != signature.k {
                return Err(Error::InvalidConfig(format!("objective {i} has a gate of width {}", own.bins.len())));
            }
            if widths[o.row] == 0 {
                widths[o.row] = own.bins.len();
            } else if widths[o.row] != own.bins.len() {
                return Err(Error::InvalidConfig(format!("row {} is gated with mixed widths", o.row)));
            }
            let code = encode_bins(&own.bins, grid.num_bins());
            buckets.entry((o.row, code)).or_default().push(i);
            let r = comp_rows[o.component].get_or_insert(o.row..o.row + 1);
            *r = r.start.min(o.row)..r.end.max(o.row + 1);
        }
        // Components must occupy contiguous index ranges.
        let mut components = Vec::with_capacity(ncomp);
        let mut start = 0;
        for c in 0..ncomp {
            let end = start + objectives[start..].iter().take_while(|o| o.component == c).count();
            if end == start {
                return Err(Error::InvalidConfig(format!("component {c} has no objectives or is not contiguous")));
            }
            components.push(start..end);
            start = end;
        }
        if start != objectives.len() {
            return Err(Error::InvalidConfig("objectives must be ordered by component".into()));
        }
        let component_rows = comp_rows.into_iter().map(|r| r.unwrap_or(0..0)).collect();
        let index: HashMap<&LinearObjective, usize> = objectives.iter().enumerate().map(|(i, o)| (o, i)).collect();
        let sign_closed = objectives.iter().all(|o| {
            let mut neg = o.clone();
            neg.sign = o.sign.flip();
            index.contains_key(&neg)
        });
        let len = objectives.len();
        Ok(Self {
            layout: Layout::Explicit(ExplicitLayout { objectives, widths, buckets }),
            grid,
            signature,
            components,
            component_rows,
            len,
            sign_closed,
            permutation_closed: false,
            scale: 1.0,
        })
    }

    /// Keeps the objectives satisfying `keep`, as an explicit set.
    pub fn filter<F: Fn(&LinearObjective) -> bool>(&self, keep: F) -> Result<Self> {
        let kept: Vec<LinearObjective> = self.manifest()?.into_iter().filter(|o| keep(o)).collect();
        Self::from_objectives(kept, self.grid, self.signature)
    }

    /// Number of objectives.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True for an empty set (never produced by the constructors).
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Binning grid of every gate.
    pub fn grid(&self) -> LevelGrid {
        self.grid
    }

    /// Prediction signature the objectives evaluate.
    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Index range of every component.
    pub fn components(&self) -> &[Range<usize>] {
        &self.components
    }

    /// Rows scored by component `c`.
    pub fn component_rows(&self, c: usize) -> Range<usize> {
        self.component_rows[c].clone()
    }

    /// Component that owns objective `idx`.
    pub fn component_of(&self, idx: usize) -> usize {
        self.components.iter().position(|r| r.contains(&idx)).expect("objective index out of range")
    }

    /// Whether the negation of every objective is a member.
    pub fn is_sign_closed(&self) -> bool {
        self.sign_closed
    }

    /// Whether coordinate-swapped objectives are members (binary sets).
    pub fn is_permutation_closed(&self) -> bool {
        self.permutation_closed
    }

    /// Factor applied to every objective value (1/2 for amplified sets);
    /// divide reported losses by it to express them in base units.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Baselines of an amplified set.
    pub fn baselines(&self) -> Option<&[DeterministicPredictor]> {
        match &self.layout {
            Layout::Amplified(a) => Some(&a.baselines),
            _ => None,
        }
    }

    /// Base set of an amplified set: objective `i·|H| + b` of the amplified
    /// set compares base objective `i` against baseline `b`.
    pub fn amplified_base(&self) -> Option<&ObjectiveSet> {
        match &self.layout {
            Layout::Amplified(a) => Some(&a.base),
            _ => None,
        }
    }

    /// Whether the set supports row-wise enumeration (needed by the
    /// per-point learners). Amplified sets do not: their objectives depend
    /// on the baselines' predictions as well as the learner's.
    pub fn supports_row_visits(&self) -> bool {
        !matches!(self.layout, Layout::Amplified(_))
    }

    /// Index of the negation of objective `idx`, when present.
    pub fn negation(&self, idx: usize) -> Option<usize> {
        match &self.layout {
            Layout::Calibration(_) | Layout::Moment(_) => Some(idx ^ 1),
            Layout::Explicit(e) => {
                let mut neg = e.objectives[idx].clone();
                neg.sign = neg.sign.flip();
                e.objectives.iter().position(|o| *o == neg)
            }
            Layout::Amplified(_) => None,
        }
    }

    /// Bin code of a row as used by the set's own-row gates.
    #[inline]
    pub fn row_code(&self, row: usize, values: &[f64]) -> usize {
        match &self.layout {
            Layout::Calibration(_) => full_code(&self.grid, values),
            Layout::Moment(_) => self.grid.bin(values[0]),
            Layout::Explicit(e) => {
                if e.widths[row] == 1 {
                    self.grid.bin(values[0])
                } else {
                    full_code(&self.grid, values)
                }
            }
            Layout::Amplified(a) => a.base.row_code(row, values),
        }
    }

    /// Descriptor of objective `idx`.
    pub fn descriptor(&self, idx: usize) -> LinearObjective {
        assert!(idx < self.len, "objective index {idx} out of range for a set of {}", self.len);
        match &self.layout {
            Layout::Calibration(c) => {
                let s = idx % 2;
                let j = (idx / 2) % c.k;
                let code = (idx / 2 / c.k) % c.codes;
                let g = idx / 2 / c.k / c.codes;
                LinearObjective {
                    kind: c.kind,
                    component: 0,
                    group: c.groups.map(|_| g),
                    gates: vec![BinGate { row: 0, bins: decode_code(code, self.grid.num_bins(), c.k) }],
                    row: 0,
                    coord: j,
                    sign: Sign::from_bit(s),
                    moment_degree: None,
                }
            }
            Layout::Moment(m) => {
                let component = idx / m.half;
                let local = idx % m.half;
                let s = local % 2;
                let j = (local / 2) % 2;
                let i = (local / 4) % m.degrees.len();
                let wb = (local / 4 / m.degrees.len()) % m.bins;
                let v = (local / 4 / m.degrees.len() / m.bins) % m.bins;
                let g = local / 4 / m.degrees.len() / m.bins / m.bins;
                let degree = m.degrees[i];
                LinearObjective {
                    kind: if component == 0 { ObjectiveKind::Mean } else { ObjectiveKind::Moment { degree } },
                    component,
                    group: Some(g),
                    gates: vec![BinGate { row: 0, bins: vec![v] }, BinGate { row: 1 + i, bins: vec![wb] }],
                    row: if component == 0 { 0 } else { 1 + i },
                    coord: j,
                    sign: Sign::from_bit(s),
                    moment_degree: Some(degree),
                }
            }
            Layout::Explicit(e) => e.objectives[idx].clone(),
            Layout::Amplified(a) => {
                let h = a.baselines.len();
                let mut d = a.base.descriptor(idx / h);
                d.kind = ObjectiveKind::Competitive { baseline: idx % h };
                d
            }
        }
    }

    /// Every descriptor, in index order. Fails when the set exceeds the
    /// default size cap.
    pub fn manifest(&self) -> Result<Vec<LinearObjective>> {
        checked_size("objective manifest", &[self.len as u128], DEFAULT_SIZE_CAP)?;
        Ok((0..self.len).map(|i| self.descriptor(i)).collect())
    }

    fn moment_index(m: &MomentLayout, component: usize, g: usize, v: usize, wb: usize, i: usize, j: usize, s: usize) -> usize {
        let local = ((((g * m.bins + v) * m.bins + wb) * m.degrees.len() + i) * 2 + j) * 2 + s;
        component * m.half + local
    }

    /// Enumerates the objectives that score `row` and are open at a point
    /// whose own-row bin code is `own_code`. The other rows' bins (and the
    /// mean used by moment targets) are read from `context`; the scored row
    /// of `context` is ignored.
    ///
    /// # Panics
    /// Panics for amplified sets (see [`ObjectiveSet::supports_row_visits`]).
    #[inline]
    pub fn visit_row<F: FnMut(OpenTerm)>(&self, row: usize, own_code: usize, context: &Prediction, w: GroupMask, mut f: F) {
        match &self.layout {
            Layout::Calibration(c) => {
                if row != 0 {
                    return;
                }
                let mut emit = |g: usize| {
                    let base = (g * c.codes + own_code) * c.k;
                    for j in 0..c.k {
                        for s in 0..2 {
                            f(OpenTerm {
                                index: (base + j) * 2 + s,
                                coord: j,
                                sign: Sign::from_bit(s).value(),
                                target: Target::OneHot,
                            });
                        }
                    }
                };
                match c.groups {
                    Some(u) => w.iter().filter(|&g| g < u).for_each(&mut emit),
                    None => emit(0),
                }
            }
            Layout::Moment(m) => {
                let groups = w.iter().filter(|&g| g < m.groups);
                if row == 0 {
                    for g in groups {
                        for (i, _) in m.degrees.iter().enumerate() {
                            let wb = self.grid.bin(context.row(1 + i)[0]);
                            for j in 0..2 {
                                for s in 0..2 {
                                    f(OpenTerm {
                                        index: Self::moment_index(m, 0, g, own_code, wb, i, j, s),
                                        coord: j,
                                        sign: Sign::from_bit(s).value(),
                                        target: Target::OneHot,
                                    });
                                }
                            }
                        }
                    }
                } else if row <= m.degrees.len() {
                    let i = row - 1;
                    let mean = context.row(0)[0];
                    let v = self.grid.bin(mean);
                    let target = Target::CenteredMoment { degree: m.degrees[i], mean };
                    for g in groups {
                        for j in 0..2 {
                            for s in 0..2 {
                                f(OpenTerm {
                                    index: Self::moment_index(m, 1, g, v, own_code, i, j, s),
                                    coord: j,
                                    sign: Sign::from_bit(s).value(),
                                    target,
                                });
                            }
                        }
                    }
                }
            }
            Layout::Explicit(e) => {
                let Some(bucket) = e.buckets.get(&(row, own_code)) else { return };
                for &idx in bucket {
                    let o = &e.objectives[idx];
                    if o.group.is_some_and(|g| !w.contains(g)) {
                        continue;
                    }
                    let others_open = o
                        .gates
                        .iter()
                        .filter(|g| g.row != row)
                        .all(|g| gate_matches(&self.grid, g, context.row(g.row)));
                    if others_open {
                        f(OpenTerm { index: idx, coord: o.coord, sign: o.sign.value(), target: target_of(o, context) });
                    }
                }
            }
            Layout::Amplified(_) => panic!("amplified objective sets do not support row visits"),
        }
    }

    /// Calls `f(index, contribution)` for every objective with a nonzero
    /// gate at `(h(x), x, w)` evaluated at label `y`. Contributions are
    /// additive: amplified sets may report one index twice (once for the
    /// learner's term and once for the baseline's).
    pub fn for_each_open<F: FnMut(usize, f64)>(&self, pred: &Prediction, x: DomainPoint, w: GroupMask, y: usize, mut f: F) {
        match &self.layout {
            Layout::Amplified(a) => {
                let h = a.baselines.len();
                let scale = self.scale;
                a.base.for_each_open_direct(pred, w, y, |i, v| {
                    for b in 0..h {
                        f(i * h + b, scale * v);
                    }
                });
                for (b, baseline) in a.baselines.iter().enumerate() {
                    a.base.for_each_open_direct(baseline.at(x), w, y, |i, v| f(i * h + b, -scale * v));
                }
            }
            _ => self.for_each_open_direct(pred, w, y, f),
        }
    }

    fn for_each_open_direct<F: FnMut(usize, f64)>(&self, pred: &Prediction, w: GroupMask, y: usize, mut f: F) {
        for row in 0..self.signature.rows {
            let values = pred.row(row);
            let code = self.row_code(row, values);
            self.visit_row(row, code, pred, w, |t| f(t.index, t.value(values[t.coord], y)));
        }
    }

    /// Value of objective `idx` at `(h(x), x, w, y)`.
    pub fn eval(&self, idx: usize, pred: &Prediction, x: DomainPoint, w: GroupMask, y: usize) -> f64 {
        match &self.layout {
            Layout::Amplified(a) => {
                let h = a.baselines.len();
                let (i, b) = (idx / h, idx % h);
                self.scale * (a.base.eval(i, pred, x, w, y) - a.base.eval(i, a.baselines[b].at(x), x, w, y))
            }
            _ => eval_objective(&self.descriptor(idx), &self.grid, pred, &Sample { x, w, y }),
        }
    }

    /// Exact expected loss `L_{D,ℓ}(h)` of one objective.
    pub fn exact_loss<H: Hypothesis + ?Sized>(&self, idx: usize, h: &H, dist: &TabularDistribution) -> f64 {
        h.weighted_members()
            .into_iter()
            .map(|(wt, m)| wt * dist.exact_expectation(|z| self.eval(idx, m.at(z.x), z.x, z.w, z.y)))
            .sum()
    }

    /// Exact expected loss of every objective with a nonzero gate somewhere
    /// on the support; absent objectives have loss exactly zero.
    pub fn exact_losses<H: Hypothesis + ?Sized>(&self, h: &H, dist: &TabularDistribution) -> SparseLosses {
        let mut acc = SparseLosses::new(self.len);
        for (wt, m) in h.weighted_members() {
            for a in dist.atoms() {
                let z = a.sample;
                let p = wt * a.prob;
                self.for_each_open(m.at(z.x), z.x, z.w, z.y, |i, v| acc.add(i, p * v));
            }
        }
        acc
    }

    /// Empirical mean loss of every objective over a sample list.
    pub fn empirical_losses(&self, h: &DeterministicPredictor, samples: &[Sample]) -> SparseLosses {
        let mut counts: HashMap<Sample, usize> = HashMap::new();
        for z in samples {
            *counts.entry(*z).or_default() += 1;
        }
        let mut atoms: Vec<(Sample, usize)> = counts.into_iter().collect();
        atoms.sort_unstable_by_key(|(z, _)| (z.x, z.w, z.y));
        let n = samples.len().max(1) as f64;
        let mut acc = SparseLosses::new(self.len);
        for (z, c) in atoms {
            let p = c as f64 / n;
            self.for_each_open(h.at(z.x), z.x, z.w, z.y, |i, v| acc.add(i, p * v));
        }
        acc
    }
}

fn gate_matches(grid: &LevelGrid, gate: &BinGate, row: &[f64]) -> bool {
    gate.bins.iter().zip(row).all(|(&b, &c)| grid.bin(c) == b)
}

fn target_of(o: &LinearObjective, pred: &Prediction) -> Target {
    match o.kind {
        ObjectiveKind::Moment { degree } => Target::CenteredMoment { degree, mean: pred.row(0)[0] },
        _ => Target::OneHot,
    }
}

/// Evaluates a non-competitive objective descriptor at a sample.
///
/// The mean row of moment objectives is row 0.
///
/// # Panics
/// Panics when the prediction does not have the rows and classes the
/// descriptor refers to, or for competitive descriptors (which need their
/// baseline; evaluate those through [`ObjectiveSet::eval`]).
pub fn eval_objective(obj: &LinearObjective, grid: &LevelGrid, pred: &Prediction, z: &Sample) -> f64 {
    let sig = pred.signature();
    assert!(
        obj.row < sig.rows && obj.coord < sig.k && obj.gates.iter().all(|g| g.row < sig.rows && g.bins.len() <= sig.k),
        "objective does not match the prediction signature {sig}"
    );
    assert!(
        !matches!(obj.kind, ObjectiveKind::Competitive { .. }),
        "competitive objectives are evaluated through their objective set"
    );
    if obj.group.is_some_and(|g| !z.w.contains(g)) {
        return 0.0;
    }
    if !obj.gates.iter().all(|g| gate_matches(grid, g, pred.row(g.row))) {
        return 0.0;
    }
    let target = target_of(obj, pred);
    obj.sign.value() * (pred.row(obj.row)[obj.coord] - target.value(obj.coord, z.y))
}

/// Losses keyed by objective index; indices absent from the map are zero.
#[derive(Debug, Clone, Default)]
pub struct SparseLosses {
    len: usize,
    values: HashMap<usize, f64>,
}

impl SparseLosses {
    /// Empty accumulator for a set of `len` objectives.
    pub fn new(len: usize) -> Self {
        Self { len, values: HashMap::new() }
    }

    /// Adds `v` to objective `i`.
    #[inline]
    pub fn add(&mut self, i: usize, v: f64) {
        *self.values.entry(i).or_insert(0.0) += v;
    }

    /// Loss of objective `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.values.get(&i).copied().unwrap_or(0.0)
    }

    /// Nonzero-gate entries (unordered).
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&i, &v)| (i, v))
    }

    /// Maximum loss restricted to the index range, with its smallest
    /// achieving index.
    pub fn argmax_in(&self, range: Range<usize>) -> (usize, f64) {
        let mut best: Option<(usize, f64)> = None;
        let mut present = 0usize;
        for (&i, &v) in &self.values {
            if !range.contains(&i) {
                continue;
            }
            present += 1;
            best = match best {
                Some((bi, bv)) if bv > v || (bv == v && bi < i) => Some((bi, bv)),
                _ => Some((i, v)),
            };
        }
        if present < range.len() {
            // Some objective in range has loss exactly zero.
            let first_zero = range.clone().find(|i| !self.values.contains_key(i)).expect("an absent index exists");
            match best {
                Some((bi, bv)) if bv > 0.0 || (bv == 0.0 && bi < first_zero) => {}
                _ => best = Some((first_zero, 0.0)),
            }
        }
        best.expect("nonempty range")
    }

    /// Maximum loss over the whole set with its smallest achieving index.
    pub fn argmax(&self) -> (usize, f64) {
        self.argmax_in(0..self.len)
    }
}

#[cfg(test)]
mod tests;
