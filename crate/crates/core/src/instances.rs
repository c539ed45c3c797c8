//! Bundled and generated problem instances.
//!
//! These are the small tabular laws the acceptance checks, the CLI
//! configurations and the self-test run on. Every constructor is
//! deterministic; random families take an explicit generator.

use rand::Rng;

use crate::distribution::TabularDistribution;
use crate::domain::{DeterministicPredictor, GroupFamily, GroupMask, LevelGrid, Prediction};
use crate::error::{Error, Result};
use crate::objectives::{amplify_competitive, build_multicalib_objectives, BuildOptions, MultiObjectiveProblem, Sign};

/// Text of the bundled realizable multi-calibration instance (`|X| = 8`,
/// two overlapping groups, binary labels).
pub const MC_SMALL_JSON: &str = include_str!("../data/mc_small.json");

/// Bin width the bundled instance is meant to be calibrated at.
pub const MC_SMALL_LAMBDA: f64 = 0.25;

/// The bundled realizable instance.
pub fn mc_small() -> TabularDistribution {
    TabularDistribution::from_json(MC_SMALL_JSON).expect("bundled instance is valid")
}

/// Multi-calibration problem on the bundled instance at width
/// [`MC_SMALL_LAMBDA`].
pub fn mc_small_problem() -> MultiObjectiveProblem {
    MultiObjectiveProblem::multicalibration(mc_small(), LevelGrid::new(MC_SMALL_LAMBDA).expect("valid width"), BuildOptions::default())
        .expect("bundled problem builds")
}

/// Random point marginal with every entry at least `1 / (4n)`.
fn random_px<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.25 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut px: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = 1.0 - px.iter().sum::<f64>();
    px[0] += drift;
    px
}

/// Random label law over `k` classes.
fn random_law<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut law: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = 1.0 - law.iter().sum::<f64>();
    law[0] += drift;
    law
}

/// Random multi-calibration instance: `n` points, `u` nonempty random
/// feature groups, random marginal and label laws over `k` classes.
pub fn random_mc<R: Rng + ?Sized>(n: usize, u: usize, k: usize, rng: &mut R) -> Result<TabularDistribution> {
    let groups: Vec<Vec<usize>> = (0..u)
        .map(|_| {
            let mut g: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            if g.is_empty() {
                g.push(rng.random_range(0..n));
            }
            g
        })
        .collect();
    let family = GroupFamily::new(n, groups)?;
    let px = random_px(n, rng);
    let laws = (0..n).map(|_| random_law(k, rng)).collect();
    TabularDistribution::from_features(px, family, laws)
}

/// Instance for the class-count sweep: `|X| = 8`, groups `{0..5}` and
/// `{3..8}`, uniform marginal; every point puts mass `0.9` on class 0 and
/// spreads the rest evenly over the other classes. The uniform start is
/// miscalibrated by `0.9 − 1/k` on class 0, so the learner must move a
/// `ln k`-sized amount of log-weight before any iterate is accurate.
pub fn dominant_class(k: usize) -> Result<TabularDistribution> {
    let n = 8;
    let family = GroupFamily::new(n, vec![(0..5).collect(), (3..8).collect()])?;
    let mut law = vec![0.1 / (k - 1) as f64; k];
    law[0] = 0.9;
    TabularDistribution::from_features(vec![1.0 / n as f64; n], family, vec![law; n])
}

/// The three-point agnostic instance where calibration rewards lumping
/// points together. Two identity groups, each carried with probability
/// `1/2` at every point. At `x₁` both groups see class 0 with probability
/// 0.1; at `x₂` group 0 always sees class 0 and group 1 class 1; `x₃` is
/// the mirror image of `x₂`.
pub fn lumping_instance() -> TabularDistribution {
    let g0 = GroupMask::from_indices([0]);
    let g1 = GroupMask::from_indices([1]);
    let membership = vec![
        vec![(g0, 0.5, vec![0.1, 0.9]), (g1, 0.5, vec![0.1, 0.9])],
        vec![(g0, 0.5, vec![1.0, 0.0]), (g1, 0.5, vec![0.0, 1.0])],
        vec![(g0, 0.5, vec![0.0, 1.0]), (g1, 0.5, vec![1.0, 0.0])],
    ];
    TabularDistribution::from_membership(2, 2, vec![1.0 / 3.0; 3], membership).expect("lumping instance is valid")
}

/// The "natural" predictor of [`lumping_instance`]: each point's label mean,
/// `(0.1, 0.5, 0.5)` on the first coordinate.
pub fn lumping_natural_predictor() -> DeterministicPredictor {
    DeterministicPredictor::new(
        [0.1, 0.5, 0.5].iter().map(|&a| Prediction::single(vec![a, 1.0 - a]).expect("valid row")).collect(),
    )
    .expect("valid predictor")
}

/// Four-point binary instance for moment calibration: uniform marginal,
/// groups `{0, 1, 2, 3}` and `{0, 1}`, class-0 probabilities
/// `(0.05, 0.25, 0.8, 0.95)`, so the uniform start violates both the mean
/// and the variance conditions.
pub fn moment_instance() -> TabularDistribution {
    let family = GroupFamily::new(4, vec![vec![0, 1, 2, 3], vec![0, 1]]).expect("valid groups");
    let laws = [0.05, 0.25, 0.8, 0.95].iter().map(|&a| vec![a, 1.0 - a]).collect();
    TabularDistribution::from_features(vec![0.25; 4], family, laws).expect("valid instance")
}

/// Six-point binary instance with two overlapping feature groups, used for
/// conditional multi-calibration.
pub fn conditional_instance() -> TabularDistribution {
    let family = GroupFamily::new(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).expect("valid groups");
    let laws = [0.15, 0.3, 0.45, 0.6, 0.8, 0.9].iter().map(|&a| vec![a, 1.0 - a]).collect();
    TabularDistribution::from_features(vec![0.1, 0.2, 0.15, 0.15, 0.2, 0.2], family, laws).expect("valid instance")
}

/// A competitive instance whose class admits one member that is
/// simultaneously optimal for every objective.
#[derive(Debug, Clone)]
pub struct CompetitiveInstance {
    /// The amplified problem.
    pub problem: MultiObjectiveProblem,
    /// The explicit class (also the amplification baselines).
    pub class: Vec<DeterministicPredictor>,
    /// Per-objective minimum over the class of the base objectives.
    pub base_minima: Vec<f64>,
}

/// Largest class [`competitive_from`] enumerates.
pub const COMPETITIVE_CLASS_CAP: usize = 100_000;

/// Competitive problem on a binary law with feature groups. The base
/// objectives are the one-sided multi-calibration objectives (sign `+`,
/// coordinate 0) at width `grid`, and the class is every predictor on the
/// grid's levels whose first coordinate is at least the label mean at every
/// point. Each base objective is nonnegative on the class; when the label
/// means lie on the grid, the Bayes predictor is a member and zeroes every
/// objective at once, so the amplified game has value at most zero.
pub fn competitive_from(dist: TabularDistribution, grid: LevelGrid) -> Result<CompetitiveInstance> {
    if dist.k() != 2 {
        return Err(Error::InvalidConfig(format!("competitive instances are binary, got k={}", dist.k())));
    }
    let family = dist
        .feature_groups()
        .cloned()
        .ok_or_else(|| Error::InvalidConfig("competitive instances need feature-defined groups".into()))?;
    let base = build_multicalib_objectives(&family, grid, 2, BuildOptions::default())?
        .filter(|o| o.sign == Sign::Plus && o.coord == 0)?;
    let bayes = dist.bayes_predictor();
    let levels: Vec<Vec<f64>> = (0..dist.domain_size())
        .map(|x| {
            let mean = bayes.at(x).row(0)[0];
            (0..grid.num_bins()).map(|b| grid.value(b).min(1.0)).filter(|&v| v >= mean - 1e-9).collect()
        })
        .collect();
    let size = levels.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len())).unwrap_or(usize::MAX);
    if size > COMPETITIVE_CLASS_CAP {
        return Err(Error::SizeCap {
            what: "competitive class",
            requested: size as u128,
            cap: COMPETITIVE_CLASS_CAP as u128,
            hint: "use fewer points or a coarser grid",
        });
    }
    let mut class = Vec::with_capacity(size);
    let mut choice = vec![0usize; levels.len()];
    loop {
        let table = choice
            .iter()
            .zip(&levels)
            .map(|(&i, l)| Prediction::single(vec![l[i], 1.0 - l[i]]))
            .collect::<Result<Vec<_>>>()?;
        class.push(DeterministicPredictor::new(table)?);
        // Odometer increment, last point fastest.
        let Some(pos) = (0..choice.len()).rev().find(|&p| choice[p] + 1 < levels[p].len()) else { break };
        choice[pos] += 1;
        choice[pos + 1..].iter_mut().for_each(|c| *c = 0);
    }
    let base_minima = {
        let losses: Vec<_> = class.iter().map(|h| base.exact_losses(h, &dist)).collect();
        (0..base.len()).map(|i| losses.iter().map(|l| l.get(i)).fold(f64::INFINITY, f64::min)).collect()
    };
    let amplified = amplify_competitive(&base, class.clone())?;
    let problem = MultiObjectiveProblem::competitive(dist, amplified)?;
    Ok(CompetitiveInstance { problem, class, base_minima })
}

/// The bundled competitive instance: three points with class-0
/// probabilities `(0.25, 0.5, 0.75)`, groups `{0, 1}` and `{1, 2}`,
/// at width `0.25` (see [`competitive_from`]).
pub fn competitive_instance() -> Result<CompetitiveInstance> {
    let family = GroupFamily::new(3, vec![vec![0, 1], vec![1, 2]])?;
    let laws = [0.25, 0.5, 0.75].iter().map(|&a| vec![a, 1.0 - a]).collect();
    let dist = TabularDistribution::from_features(vec![1.0 / 3.0; 3], family, laws)?;
    competitive_from(dist, LevelGrid::new(0.25)?)
}
