//! Property tests of the structural invariants: audit/objective duality,
//! Hedge validity and regret, rounding, and brute-force monotonicity.

use multical::audit::{audit_agnostic, audit_multicalibration, brute_force_opt, BruteForceConfig};
use multical::dynamics::majority_round;
use multical::instances::random_mc;
use multical::objectives::BuildOptions;
use multical::players::{realized_regret, HedgeState};
use multical::{
    bin_of, seeded_rng, DeterministicPredictor, EnsemblePredictor, GroupMask, LevelGrid, MultiObjectiveProblem,
    Prediction, TabularDistribution,
};
use proptest::prelude::*;
use rand::Rng;

fn random_predictor<R: Rng>(n: usize, k: usize, rng: &mut R) -> DeterministicPredictor {
    DeterministicPredictor::new(
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                Prediction::normalized(multical::Signature::new(k, 1), raw.iter().map(|v| v / s).collect()).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn lambda_strategy() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.5, 0.25, 0.2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multicalibration_audit_equals_max_objective_loss(
        seed in any::<u64>(), n in 1usize..5, u in 1usize..4, k in 2usize..4, lambda in lambda_strategy()
    ) {
        let mut rng = seeded_rng(seed);
        let dist = random_mc(n, u, k, &mut rng).unwrap();
        let grid = LevelGrid::new(lambda).unwrap();
        let problem = MultiObjectiveProblem::multicalibration(dist.clone(), grid, BuildOptions::default()).unwrap();
        let h = random_predictor(n, k, &mut rng);
        let audit = audit_multicalibration(&h, &dist, &grid).value;
        prop_assert!((audit - problem.multi_objective_loss(&h).1).abs() < 1e-12);
    }

    #[test]
    fn agnostic_audit_equals_max_objective_loss(seed in any::<u64>(), lambda in lambda_strategy()) {
        let mut rng = seeded_rng(seed);
        let membership = (0..3)
            .map(|_| {
                let a: f64 = rng.random_range(0.1..0.9);
                let law = |rng: &mut multical::SeededRng| {
                    let p: f64 = rng.random();
                    vec![p, 1.0 - p]
                };
                vec![(GroupMask::from_indices([0]), a, law(&mut rng)), (GroupMask::from_indices([0, 1]), 1.0 - a, law(&mut rng))]
            })
            .collect();
        let dist = TabularDistribution::from_membership(2, 2, vec![0.3, 0.3, 0.4], membership).unwrap();
        let grid = LevelGrid::new(lambda).unwrap();
        let problem = MultiObjectiveProblem::agnostic(dist.clone(), grid, BuildOptions::default()).unwrap();
        let h = random_predictor(3, 2, &mut rng);
        prop_assert!((audit_agnostic(&h, &dist, &grid).value - problem.multi_objective_loss(&h).1).abs() < 1e-12);
    }

    #[test]
    fn ensemble_audit_is_linear_in_members(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let dist = random_mc(3, 2, 2, &mut rng).unwrap();
        let grid = LevelGrid::new(0.25).unwrap();
        let problem = MultiObjectiveProblem::multicalibration(dist, grid, BuildOptions::default()).unwrap();
        let members: Vec<DeterministicPredictor> = (0..4).map(|_| random_predictor(3, 2, &mut rng)).collect();
        let e = EnsemblePredictor::new(members.clone()).unwrap();
        let joint = problem.exact_losses(&e);
        let parts: Vec<_> = members.iter().map(|m| problem.exact_losses(m)).collect();
        for i in 0..problem.objectives().len() {
            let mean = parts.iter().map(|p| p[0].get(i)).sum::<f64>() / 4.0;
            prop_assert!((joint[0].get(i) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn hedge_stays_on_the_simplex_and_meets_its_bound(seed in any::<u64>(), n in 2usize..12, t in 1usize..300) {
        let mut rng = seeded_rng(seed);
        let mut hedge = HedgeState::new(n, t).unwrap();
        let mut plays = Vec::new();
        let mut losses = Vec::new();
        for _ in 0..t {
            let p = hedge.distribution();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let l: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            hedge.update(&l);
            plays.push(p);
            losses.push(l);
        }
        let bound = 2.0 * (t as f64 * (n as f64).ln()).sqrt();
        prop_assert!(realized_regret(&plays, &losses) <= bound + 1e-9);
    }

    #[test]
    fn majority_round_keeps_the_modal_bin(seed in any::<u64>(), members in 1usize..8) {
        let mut rng = seeded_rng(seed);
        let grid = LevelGrid::new(0.25).unwrap();
        let ms: Vec<DeterministicPredictor> = (0..members).map(|_| random_predictor(3, 3, &mut rng)).collect();
        let e = EnsemblePredictor::new(ms.clone()).unwrap();
        let rounded = majority_round(&e, &grid).unwrap();
        for x in 0..3 {
            let mut counts = std::collections::BTreeMap::new();
            for m in &ms {
                *counts.entry(bin_of(m.at(x), &grid)).or_insert(0usize) += 1;
            }
            let top = *counts.values().max().unwrap();
            let modal = counts.iter().find(|(_, &c)| c == top).unwrap().0.clone();
            prop_assert_eq!(bin_of(rounded.at(x), &grid), modal);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn brute_force_is_monotone_under_refinement(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = seeded_rng(seed);
        let dist = random_mc(n, 2, 2, &mut rng).unwrap();
        let problem =
            MultiObjectiveProblem::multicalibration(dist, LevelGrid::new(0.25).unwrap(), BuildOptions::default()).unwrap();
        let cfg = BruteForceConfig { min_step: 0.125, ..Default::default() };
        let coarse = brute_force_opt(&problem, 0.5, &cfg).unwrap().value;
        let mid = brute_force_opt(&problem, 0.25, &cfg).unwrap().value;
        let fine = brute_force_opt(&problem, 0.125, &cfg).unwrap().value;
        prop_assert!(mid <= coarse + 1e-12 && fine <= mid + 1e-12);
        prop_assert!(fine >= -1e-9);
    }
}
