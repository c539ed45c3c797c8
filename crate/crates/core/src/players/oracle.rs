//! Adversary oracles: given the learner's current predictor, return a
//! (near-)worst objective of one component.
//!
//! * exact: the true argmax from the tabular law (a `(1, 0)`-agnostic
//!   oracle);
//! * empirical: the argmax of empirical losses over fresh samples;
//! * weak: any objective beating a minmax reference by `ε` (and reaching a
//!   `c` fraction of the maximum), or "below threshold";
//! * noisy max: empirical losses on one shared, reused sample buffer plus
//!   independent Gaussian noise per query (a simplified report-noisy-max
//!   mechanism, validated empirically rather than proved).
//!
//! Answers are *actions* of the component: `(distribution, objective)`
//! pairs encoded by [`MultiObjectiveProblem::action_index`].

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{DeterministicPredictor, Sample};
use crate::error::{Error, Result};
use crate::objectives::{MultiObjectiveProblem, SparseLosses};

/// How the oracle finds its objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OracleMode {
    /// True argmax from the tabular law.
    Exact,
    /// Argmax of empirical losses over `samples` fresh draws per distribution.
    Empirical {
        /// Fresh samples per distribution per call.
        samples: usize,
    },
    /// Weak oracle: an objective with exact loss at least
    /// `reference + epsilon` and at least `c` times the maximum.
    Weak {
        /// Fraction of the maximum the answer must reach, in `(0, 1]`.
        c: f64,
        /// Margin over the minmax reference.
        epsilon: f64,
    },
    /// Report-noisy-max over a shared sample buffer.
    NoisyMax {
        /// Buffer size per distribution.
        buffer: usize,
        /// Standard deviation of the per-query Gaussian noise.
        sigma: f64,
    },
}

/// Oracle configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Oracle mode.
    #[serde(flatten)]
    pub mode: OracleMode,
    /// Failure probability δ used by the sample-size formulas.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Minmax reference value (required by the weak oracle).
    #[serde(default)]
    pub reference: Option<f64>,
}

fn default_delta() -> f64 {
    0.05
}

/// Largest component the noisy-max oracle enumerates action by action.
pub const NOISY_MAX_ENUMERATION_CAP: usize = 5_000_000;

impl OracleConfig {
    /// Exact oracle.
    pub fn exact() -> Self {
        Self { mode: OracleMode::Exact, delta: default_delta(), reference: None }
    }

    /// Empirical oracle with `N = ⌈8 ε⁻² ln(4|𝒢|/δ)⌉` samples.
    pub fn empirical(epsilon: f64, delta: f64, num_objectives: usize) -> Self {
        Self {
            mode: OracleMode::Empirical { samples: empirical_sample_size(epsilon, delta, num_objectives) },
            delta,
            reference: None,
        }
    }

    /// Weak oracle with reference value `reference`.
    pub fn weak(c: f64, epsilon: f64, reference: f64) -> Self {
        Self { mode: OracleMode::Weak { c, epsilon }, delta: default_delta(), reference: Some(reference) }
    }

    /// Noisy-max oracle sized for a run of `horizon` queries.
    pub fn noisy_max(epsilon: f64, delta: f64, num_objectives: usize, horizon: usize) -> Self {
        Self {
            mode: OracleMode::NoisyMax {
                buffer: noisy_max_buffer_size(horizon, epsilon, delta, num_objectives),
                sigma: noisy_max_sigma(epsilon, delta, num_objectives),
            },
            delta,
            reference: None,
        }
    }

    /// Checks the mode's parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("oracle delta must lie in (0, 1), got {}", self.delta)));
        }
        match self.mode {
            OracleMode::Exact => Ok(()),
            OracleMode::Empirical { samples } if samples >= 1 => Ok(()),
            OracleMode::Empirical { .. } => Err(Error::InvalidConfig("empirical oracle needs at least one sample".into())),
            OracleMode::Weak { c, epsilon } => {
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::InvalidConfig(format!("weak oracle c must lie in (0, 1], got {c}")));
                }
                if !(epsilon >= 0.0) {
                    return Err(Error::InvalidConfig(format!("weak oracle epsilon must be nonnegative, got {epsilon}")));
                }
                if self.reference.is_none() {
                    return Err(Error::MissingReference("the weak oracle compares against the minmax value"));
                }
                Ok(())
            }
            OracleMode::NoisyMax { buffer, sigma } => {
                if buffer == 0 {
                    return Err(Error::Empty("noisy-max sample buffer"));
                }
                if !(sigma > 0.0) {
                    return Err(Error::InvalidConfig(format!("noisy-max sigma must be positive, got {sigma}")));
                }
                Ok(())
            }
        }
    }

    /// Answers one query for component `c` against predictor `h`.
    /// `buffer` is required in noisy-max mode.
    pub fn query<R: Rng + ?Sized>(
        &self,
        problem: &MultiObjectiveProblem,
        c: usize,
        h: &DeterministicPredictor,
        buffer: Option<&SampleBuffer>,
        rng: &mut R,
        counters: &mut Counters,
    ) -> Result<OracleAnswer> {
        match self.mode {
            OracleMode::Exact | OracleMode::Empirical { .. } => agnostic_oracle(problem, c, h, self, rng, counters),
            OracleMode::Weak { c: fraction, epsilon } => {
                let reference = self.reference.ok_or(Error::MissingReference("weak oracle query"))?;
                weak_oracle(problem, c, h, fraction, epsilon, reference, counters)
            }
            OracleMode::NoisyMax { sigma, .. } => {
                let buffer = buffer.ok_or(Error::Empty("noisy-max sample buffer"))?;
                noisy_max_oracle(problem, c, h, buffer, sigma, rng, counters)
            }
        }
    }
}

/// Empirical oracle sample size `⌈8 ε⁻² ln(4|𝒢|/δ)⌉`.
pub fn empirical_sample_size(epsilon: f64, delta: f64, num_objectives: usize) -> usize {
    (8.0 / (epsilon * epsilon) * (4.0 * num_objectives as f64 / delta).ln()).ceil().max(1.0) as usize
}

/// Noisy-max buffer size `⌈√T ε⁻² ln(|𝒢|/ε) ln^{3/2}(1/(εδ))⌉`.
pub fn noisy_max_buffer_size(horizon: usize, epsilon: f64, delta: f64, num_objectives: usize) -> usize {
    let a = (num_objectives as f64 / epsilon).ln().max(1.0);
    let b = (1.0 / (epsilon * delta)).ln().max(1.0).powf(1.5);
    ((horizon as f64).sqrt() / (epsilon * epsilon) * a * b).ceil().max(1.0) as usize
}

/// Noisy-max noise scale `σ = ε / (4 √(2 ln(2|𝒢|/δ)))`: a union bound over
/// `|𝒢|` Gaussian draws keeps every noise term below `ε/4` with
/// probability `1 − δ`.
pub fn noisy_max_sigma(epsilon: f64, delta: f64, num_objectives: usize) -> f64 {
    epsilon / (4.0 * (2.0 * (2.0 * num_objectives as f64 / delta).ln()).sqrt())
}

/// Oracle-call and sample counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Oracle queries answered.
    pub oracle_calls: u64,
    /// Samples drawn from the distributions.
    pub samples: u64,
}

/// An oracle's answer for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "answer", rename_all = "snake_case")]
pub enum OracleAnswer {
    /// The selected action with the loss the oracle reported for it.
    Objective {
        /// Component action index.
        action: usize,
        /// Reported loss (exact, empirical or noisy, depending on the mode).
        reported: f64,
    },
    /// No objective clears the weak oracle's threshold.
    BelowThreshold,
}

impl OracleAnswer {
    /// Selected action, if any.
    pub fn action(&self) -> Option<usize> {
        match self {
            OracleAnswer::Objective { action, .. } => Some(*action),
            OracleAnswer::BelowThreshold => None,
        }
    }
}

/// A reusable weighted sample per distribution, stored as aggregated atoms
/// `(sample, weight)` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    atoms: Vec<Vec<(Sample, f64)>>,
    size: usize,
}

impl SampleBuffer {
    /// Draws `n` samples from every distribution of the problem.
    pub fn draw<R: Rng + ?Sized>(problem: &MultiObjectiveProblem, n: usize, rng: &mut R, counters: &mut Counters) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("noisy-max sample buffer"));
        }
        let atoms = problem.distributions().iter().map(|d| aggregate(&d.sample_n(n, rng))).collect();
        counters.samples += (n * problem.distributions().len()) as u64;
        Ok(Self { atoms, size: n })
    }

    /// The full support of every distribution with its exact probabilities
    /// (the noiseless limit of a buffer).
    pub fn exact(problem: &MultiObjectiveProblem) -> Self {
        let atoms = problem
            .distributions()
            .iter()
            .map(|d| d.atoms().iter().map(|a| (a.sample, a.prob)).collect())
            .collect();
        Self { atoms, size: 0 }
    }

    /// Samples drawn per distribution (zero for exact buffers).
    pub fn size(&self) -> usize {
        self.size
    }

    /// Weighted atoms of distribution `d`.
    pub fn atoms(&self, d: usize) -> &[(Sample, f64)] {
        &self.atoms[d]
    }
}

/// Aggregates a sample list into `(sample, frequency)` atoms in a fixed order.
pub(crate) fn aggregate(samples: &[Sample]) -> Vec<(Sample, f64)> {
    let mut counts: HashMap<Sample, usize> = HashMap::new();
    for z in samples {
        *counts.entry(*z).or_default() += 1;
    }
    let n = samples.len().max(1) as f64;
    let mut atoms: Vec<(Sample, f64)> = counts.into_iter().map(|(z, c)| (z, c as f64 / n)).collect();
    atoms.sort_unstable_by_key(|(z, _)| (z.x, z.w, z.y));
    atoms
}

/// Losses of every objective on weighted atoms.
pub(crate) fn weighted_losses(problem: &MultiObjectiveProblem, h: &DeterministicPredictor, atoms: &[(Sample, f64)]) -> SparseLosses {
    let set = problem.objectives();
    let mut acc = SparseLosses::new(set.len());
    for &(z, p) in atoms {
        set.for_each_open(h.at(z.x), z.x, z.w, z.y, |i, v| acc.add(i, p * v));
    }
    acc
}

fn answer(problem: &MultiObjectiveProblem, c: usize, ((d, idx), v): ((usize, usize), f64)) -> OracleAnswer {
    OracleAnswer::Objective { action: problem.action_index(c, d, idx), reported: v }
}

/// Exact or empirical agnostic oracle (the modes of `cfg` other than these
/// are rejected).
pub fn agnostic_oracle<R: Rng + ?Sized>(
    problem: &MultiObjectiveProblem,
    c: usize,
    h: &DeterministicPredictor,
    cfg: &OracleConfig,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<OracleAnswer> {
    problem.check_predictor(h)?;
    if problem.component_range(c).is_empty() {
        return Err(Error::Empty("objective set"));
    }
    let losses = match cfg.mode {
        OracleMode::Exact => problem.exact_losses(h),
        OracleMode::Empirical { samples } => {
            if samples == 0 {
                return Err(Error::InvalidConfig("empirical oracle needs at least one sample".into()));
            }
            counters.samples += (samples * problem.distributions().len()) as u64;
            problem
                .distributions()
                .iter()
                .map(|d| weighted_losses(problem, h, &aggregate(&d.sample_n(samples, rng))))
                .collect()
        }
        other => return Err(Error::Unsupported(format!("agnostic oracle in mode {other:?}"))),
    };
    counters.oracle_calls += 1;
    Ok(answer(problem, c, problem.component_argmax(&losses, c)))
}

/// Weak oracle: among actions whose exact loss is at least
/// `reference + epsilon` and at least `fraction` times the component
/// maximum, returns one with the smallest loss (ties to the smallest
/// action); "below threshold" when none qualifies. Returning the weakest
/// qualifying objective exercises the weak contract rather than the exact
/// argmax.
pub fn weak_oracle(
    problem: &MultiObjectiveProblem,
    c: usize,
    h: &DeterministicPredictor,
    fraction: f64,
    epsilon: f64,
    reference: f64,
    counters: &mut Counters,
) -> Result<OracleAnswer> {
    problem.check_predictor(h)?;
    let range = problem.component_range(c);
    if range.is_empty() {
        return Err(Error::Empty("objective set"));
    }
    let losses = problem.exact_losses(h);
    counters.oracle_calls += 1;
    let (_, max) = problem.component_argmax(&losses, c);
    let threshold = (reference + epsilon).max(fraction * max);
    if max < reference + epsilon {
        return Ok(OracleAnswer::BelowThreshold);
    }
    let mut best: Option<(f64, usize)> = None;
    let mut consider = |v: f64, a: usize| {
        if v >= threshold && best.is_none_or(|(bv, ba)| v < bv || (v == bv && a < ba)) {
            best = Some((v, a));
        }
    };
    for (d, l) in losses.iter().enumerate() {
        let mut present = 0;
        for (i, v) in l.entries() {
            if range.contains(&i) {
                present += 1;
                consider(v, problem.action_index(c, d, i));
            }
        }
        if present < range.len() {
            let (zero_idx, zero) = first_absent(l, range.clone());
            consider(zero, problem.action_index(c, d, zero_idx));
        }
    }
    Ok(match best {
        Some((v, a)) => OracleAnswer::Objective { action: a, reported: v },
        None => OracleAnswer::BelowThreshold,
    })
}

fn first_absent(l: &SparseLosses, range: std::ops::Range<usize>) -> (usize, f64) {
    let present: std::collections::HashSet<usize> = l.entries().map(|(i, _)| i).collect();
    (range.clone().find(|i| !present.contains(i)).expect("an absent index exists"), 0.0)
}

/// Report-noisy-max: empirical losses on the shared buffer plus an
/// independent `Normal(0, σ)` draw per action (drawn in action order), and
/// the noisy argmax.
pub fn noisy_max_oracle<R: Rng + ?Sized>(
    problem: &MultiObjectiveProblem,
    c: usize,
    h: &DeterministicPredictor,
    buffer: &SampleBuffer,
    sigma: f64,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<OracleAnswer> {
    problem.check_predictor(h)?;
    if buffer.atoms.iter().any(|a| a.is_empty()) {
        return Err(Error::Empty("noisy-max sample buffer"));
    }
    let range = problem.component_range(c);
    if range.is_empty() {
        return Err(Error::Empty("objective set"));
    }
    let actions = problem.num_actions(c);
    if actions > NOISY_MAX_ENUMERATION_CAP {
        return Err(Error::SizeCap {
            what: "noisy-max action enumeration",
            requested: actions as u128,
            cap: NOISY_MAX_ENUMERATION_CAP as u128,
            hint: "use the exact or empirical oracle for large objective sets",
        });
    }
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(format!("noisy-max sigma: {e}")))?)
    } else {
        None
    };
    counters.oracle_calls += 1;
    let mut best: Option<(f64, usize)> = None;
    for (d, atoms) in buffer.atoms.iter().enumerate() {
        let losses = weighted_losses(problem, h, atoms);
        for idx in range.clone() {
            let v = losses.get(idx) + noise.map_or(0.0, |n| n.sample(rng));
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, problem.action_index(c, d, idx)));
            }
        }
    }
    let (v, a) = best.expect("nonempty component");
    Ok(OracleAnswer::Objective { action: a, reported: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{seeded_rng, TabularDistribution};
    use crate::domain::{GroupFamily, LevelGrid, Prediction};
    use crate::objectives::BuildOptions;

    /// The two-point, single-group instance with Bayes rows (0.3, 0.7) and (0.7, 0.3).
    fn instance() -> MultiObjectiveProblem {
        let fam = GroupFamily::whole_domain(2).unwrap();
        let d = TabularDistribution::from_features(vec![0.5, 0.5], fam, vec![vec![0.3, 0.7], vec![0.7, 0.3]]).unwrap();
        MultiObjectiveProblem::multicalibration(d, LevelGrid::new(0.25).unwrap(), BuildOptions::default()).unwrap()
    }

    fn constant(p: &MultiObjectiveProblem, row: Vec<f64>) -> DeterministicPredictor {
        DeterministicPredictor::constant(p.domain_size(), Prediction::single(row).unwrap())
    }

    #[test]
    fn exact_oracle_on_constant_predictor() {
        let p = instance();
        let h = constant(&p, vec![1.0, 0.0]);
        let mut counters = Counters::default();
        let ans = agnostic_oracle(&p, 0, &h, &OracleConfig::exact(), &mut seeded_rng(0), &mut counters).unwrap();
        let OracleAnswer::Objective { action, reported } = ans else { panic!("exact oracle always answers") };
        assert!((reported - 0.5).abs() < 1e-12);
        let d = p.objectives().descriptor(p.action(0, action).1);
        assert_eq!((d.coord, d.sign), (0, crate::objectives::Sign::Plus));
        assert_eq!(d.gates[0].bins, vec![4, 0]);
        assert_eq!(counters, Counters { oracle_calls: 1, samples: 0 });
    }

    #[test]
    fn exact_oracle_matches_brute_force_max() {
        let p = instance();
        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let table = (0..2)
                .map(|_| {
                    let a: f64 = rng.random();
                    Prediction::single(vec![a, 1.0 - a]).unwrap()
                })
                .collect();
            let h = DeterministicPredictor::new(table).unwrap();
            let brute = (0..p.objectives().len())
                .map(|i| p.objectives().exact_loss(i, &h, p.base()))
                .fold(f64::MIN, f64::max);
            let ans = agnostic_oracle(&p, 0, &h, &OracleConfig::exact(), &mut rng, &mut Counters::default()).unwrap();
            let OracleAnswer::Objective { reported, .. } = ans else { unreachable!() };
            assert!((reported - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrated_predictor_reports_zero() {
        let p = instance();
        let h = p.base().bayes_predictor();
        let ans = agnostic_oracle(&p, 0, &h, &OracleConfig::exact(), &mut seeded_rng(0), &mut Counters::default()).unwrap();
        let OracleAnswer::Objective { reported, .. } = ans else { unreachable!() };
        assert!(reported.abs() < 1e-12);
    }

    #[test]
    fn empirical_oracle_counts_samples() {
        let p = instance();
        let h = constant(&p, vec![0.5, 0.5]);
        let cfg = OracleConfig { mode: OracleMode::Empirical { samples: 50 }, delta: 0.05, reference: None };
        let mut counters = Counters::default();
        agnostic_oracle(&p, 0, &h, &cfg, &mut seeded_rng(1), &mut counters).unwrap();
        assert_eq!(counters, Counters { oracle_calls: 1, samples: 50 });
    }

    #[test]
    fn weak_oracle_contract() {
        let p = instance();
        let h = constant(&p, vec![1.0, 0.0]);
        let mut counters = Counters::default();
        let ans = weak_oracle(&p, 0, &h, 1e-9, 0.1, 0.0, &mut counters).unwrap();
        let OracleAnswer::Objective { action, reported } = ans else { panic!("violation 0.5 clears 0.1") };
        assert!(reported >= 0.1);
        let exact = p.objectives().exact_loss(p.action(0, action).1, &h, p.base());
        assert!((exact - reported).abs() < 1e-12);
        // With a threshold above every loss the oracle declines.
        assert_eq!(weak_oracle(&p, 0, &h, 1.0, 0.6, 0.0, &mut counters).unwrap(), OracleAnswer::BelowThreshold);
        let bayes = p.base().bayes_predictor();
        assert_eq!(weak_oracle(&p, 0, &bayes, 1.0, 0.1, 0.0, &mut counters).unwrap(), OracleAnswer::BelowThreshold);
        assert_eq!(counters.oracle_calls, 3);
    }

    #[test]
    fn weak_oracle_needs_reference() {
        let cfg = OracleConfig { mode: OracleMode::Weak { c: 1.0, epsilon: 0.1 }, delta: 0.05, reference: None };
        assert!(matches!(cfg.validate(), Err(Error::MissingReference(_))));
    }

    #[test]
    fn noiseless_noisy_max_on_exact_buffer_is_exact() {
        let p = instance();
        let buffer = SampleBuffer::exact(&p);
        let mut rng = seeded_rng(5);
        for a in [0.0, 0.2, 0.45, 0.8, 1.0] {
            let h = constant(&p, vec![a, 1.0 - a]);
            let exact = agnostic_oracle(&p, 0, &h, &OracleConfig::exact(), &mut rng, &mut Counters::default()).unwrap();
            let noisy = noisy_max_oracle(&p, 0, &h, &buffer, 0.0, &mut rng, &mut Counters::default()).unwrap();
            let (OracleAnswer::Objective { reported: e, .. }, OracleAnswer::Objective { reported: n, .. }) = (exact, noisy) else {
                unreachable!()
            };
            assert!((e - n).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_max_ties_spread_over_actions() {
        // The Bayes predictor has loss zero on every objective: the noisy
        // argmax is driven by noise alone and must visit many actions.
        let p = instance();
        let h = p.base().bayes_predictor();
        let buffer = SampleBuffer::exact(&p);
        let mut rng = seeded_rng(6);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..400 {
            let a = noisy_max_oracle(&p, 0, &h, &buffer, 0.01, &mut rng, &mut Counters::default()).unwrap();
            seen.insert(a.action().unwrap());
        }
        assert!(seen.len() > p.objectives().len() / 2, "{} distinct actions", seen.len());
    }

    #[test]
    fn sample_size_formulas() {
        assert_eq!(empirical_sample_size(0.1, 0.05, 36), (800.0 * (4.0 * 36.0 / 0.05f64).ln()).ceil() as usize);
        let sigma = noisy_max_sigma(0.1, 0.05, 36);
        assert!((sigma - 0.1 / (4.0 * (2.0 * (72.0 / 0.05f64).ln()).sqrt())).abs() < 1e-15);
        assert!(noisy_max_buffer_size(100, 0.1, 0.05, 36) > noisy_max_buffer_size(25, 0.1, 0.05, 36));
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = OracleConfig::weak(0.5, 0.1, 0.0);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<OracleConfig>(&text).unwrap(), cfg);
        let parsed: OracleConfig = serde_json::from_str(r#"{"mode":"empirical","samples":10}"#).unwrap();
        assert_eq!(parsed.mode, OracleMode::Empirical { samples: 10 });
    }
}
