//! Adversary payoffs of a learner play on weighted samples.
//!
//! One routine serves every loss source: a round's single samples (weight
//! one per distribution), a reused buffer, or the full tabular support
//! with exact probabilities.

use crate::domain::{DeterministicPredictor, Hypothesis, Sample};
use crate::objectives::{MultiObjectiveProblem, SparseLosses};

/// Weighted atoms `(sample, weight)` of one distribution.
pub type WeightedAtoms = Vec<(Sample, f64)>;

/// Full support of every distribution with exact probabilities.
pub fn exact_atoms(problem: &MultiObjectiveProblem) -> Vec<WeightedAtoms> {
    problem.distributions().iter().map(|d| d.atoms().iter().map(|a| (a.sample, a.prob)).collect()).collect()
}

/// One sample per distribution, each with weight one.
pub fn sample_atoms(samples: &[Sample]) -> Vec<WeightedAtoms> {
    samples.iter().map(|&z| vec![(z, 1.0)]).collect()
}

/// Payoff of every action of every component: entry `a` of component `c`
/// is `Σ_{(z, p)} p · ℓ(h, z)` over the atoms of the action's distribution,
/// averaged over the hypothesis' members. Absent actions have payoff zero.
pub fn action_payoffs<H: Hypothesis + ?Sized>(
    problem: &MultiObjectiveProblem,
    h: &H,
    atoms: &[WeightedAtoms],
) -> Vec<SparseLosses> {
    let members = h.weighted_members();
    let mut out: Vec<SparseLosses> = (0..problem.num_components()).map(|c| SparseLosses::new(problem.num_actions(c))).collect();
    let set = problem.objectives();
    let single = problem.num_components() == 1;
    for (d, list) in atoms.iter().enumerate() {
        for &(z, p) in list {
            if p == 0.0 {
                continue;
            }
            let mut emit = |i: usize, v: f64| {
                let c = if single { 0 } else { set.component_of(i) };
                out[c].add(problem.action_index(c, d, i), p * v);
            };
            match (set.amplified_base(), set.baselines()) {
                (Some(base), Some(baselines)) if members.len() > 1 => {
                    amplified_payoffs(base, baselines, set.scale(), &members, z, &mut emit)
                }
                _ => {
                    for &(wt, m) in &members {
                        set.for_each_open(m.at(z.x), z.x, z.w, z.y, |i, v| emit(i, wt * v));
                    }
                }
            }
        }
    }
    out
}

/// Amplified payoffs of a mixture: the learner's base losses are averaged
/// over members once, then spread over every baseline.
fn amplified_payoffs<F: FnMut(usize, f64)>(
    base: &crate::objectives::ObjectiveSet,
    baselines: &[DeterministicPredictor],
    scale: f64,
    members: &[(f64, &DeterministicPredictor)],
    z: Sample,
    emit: &mut F,
) {
    let h = baselines.len();
    let mut learner = SparseLosses::new(base.len());
    for &(wt, m) in members {
        base.for_each_open(m.at(z.x), z.x, z.w, z.y, |i, v| learner.add(i, wt * v));
    }
    let mut entries: Vec<(usize, f64)> = learner.entries().collect();
    entries.sort_unstable_by_key(|e| e.0);
    for (i, v) in entries {
        for b in 0..h {
            emit(i * h + b, scale * v);
        }
    }
    for (b, baseline) in baselines.iter().enumerate() {
        base.for_each_open(baseline.at(z.x), z.x, z.w, z.y, |i, v| emit(i * h + b, -scale * v));
    }
}

/// `Σ_a q(a) · payoff(a)` for a dense mixture.
pub fn mixed_payoff(payoffs: &SparseLosses, q: &[f64]) -> f64 {
    let mut entries: Vec<(usize, f64)> = payoffs.entries().collect();
    entries.sort_unstable_by_key(|e| e.0);
    entries.into_iter().map(|(a, v)| q[a] * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::TabularDistribution;
    use crate::domain::{GroupFamily, LevelGrid, MixturePredictor, Prediction};
    use crate::objectives::{amplify_competitive, BuildOptions};

    fn problem() -> MultiObjectiveProblem {
        let fam = GroupFamily::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let d = TabularDistribution::from_features(
            vec![0.2, 0.5, 0.3],
            fam,
            vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.7, 0.3]],
        )
        .unwrap();
        MultiObjectiveProblem::multicalibration(d, LevelGrid::new(0.25).unwrap(), BuildOptions::default()).unwrap()
    }

    fn constant(n: usize, a: f64) -> DeterministicPredictor {
        DeterministicPredictor::constant(n, Prediction::single(vec![a, 1.0 - a]).unwrap())
    }

    #[test]
    fn exact_atoms_reproduce_exact_losses() {
        let p = problem();
        let h = constant(3, 0.3);
        let pay = action_payoffs(&p, &h, &exact_atoms(&p));
        let exact = p.objectives().exact_losses(&h, p.base());
        for i in 0..p.objectives().len() {
            assert!((pay[0].get(i) - exact.get(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn amplified_mixture_matches_member_expansion() {
        let p = problem();
        let base = p.objectives().clone();
        let class = vec![constant(3, 0.1), constant(3, 0.6), p.base().bayes_predictor()];
        let amp = amplify_competitive(&base, class.clone()).unwrap();
        let cp = MultiObjectiveProblem::competitive(p.base().clone(), amp).unwrap();
        let mix = MixturePredictor::new(class, vec![0.2, 0.5, 0.3]).unwrap();
        let fast = action_payoffs(&cp, &mix, &exact_atoms(&cp));
        let slow = cp.objectives().exact_losses(&mix, cp.base());
        for i in 0..cp.objectives().len() {
            assert!((fast[0].get(i) - slow.get(i)).abs() < 1e-12, "objective {i}");
        }
    }
}
