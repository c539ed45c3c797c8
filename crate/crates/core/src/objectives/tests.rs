use super::*;
use crate::distribution::TabularDistribution;
use crate::domain::GroupFamily;

fn grid(lambda: f64) -> LevelGrid {
    LevelGrid::new(lambda).unwrap()
}

fn single(row: &[f64]) -> Prediction {
    Prediction::single(row.to_vec()).unwrap()
}

fn whole(n: usize) -> GroupFamily {
    GroupFamily::whole_domain(n).unwrap()
}

#[test]
fn mean_objective_value_by_hand() {
    let g = grid(0.25);
    let p = single(&[0.3, 0.7]);
    let obj = LinearObjective {
        kind: ObjectiveKind::Mean,
        component: 0,
        group: Some(0),
        gates: vec![BinGate { row: 0, bins: bin_of_row(&p, &g) }],
        row: 0,
        coord: 0,
        sign: Sign::Plus,
        moment_degree: None,
    };
    let z = Sample { x: 0, w: GroupMask::from_indices([0]), y: 0 };
    assert!((eval_objective(&obj, &g, &p, &z) - (-0.7)).abs() < 1e-15);
    // Closed bin gate.
    let other = single(&[0.8, 0.2]);
    assert_eq!(eval_objective(&obj, &g, &other, &z), 0.0);
    // Closed group gate.
    let outside = Sample { w: GroupMask::EMPTY, ..z };
    assert_eq!(eval_objective(&obj, &g, &p, &outside), 0.0);
}

fn bin_of_row(p: &Prediction, g: &LevelGrid) -> Vec<usize> {
    crate::domain::bin_of(p, g)
}

#[test]
fn moment_objective_value_by_hand() {
    let g = grid(0.25);
    let p = Prediction::from_rows(vec![vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
    let obj = LinearObjective {
        kind: ObjectiveKind::Moment { degree: 2 },
        component: 1,
        group: Some(0),
        gates: vec![BinGate { row: 0, bins: vec![g.bin(0.5)] }, BinGate { row: 1, bins: vec![g.bin(0.4)] }],
        row: 1,
        coord: 0,
        sign: Sign::Plus,
        moment_degree: Some(2),
    };
    let z = Sample { x: 0, w: GroupMask::from_indices([0]), y: 0 };
    assert!((eval_objective(&obj, &g, &p, &z) - 0.15).abs() < 1e-12);
}

#[test]
fn multicalibration_count_matches_formula() {
    let set = build_multicalib_objectives(&whole(3), grid(0.5), 2, BuildOptions::default()).unwrap();
    assert_eq!(set.len(), 36);
    let manifest = set.manifest().unwrap();
    let unique: std::collections::HashSet<_> = manifest.iter().collect();
    assert_eq!(unique.len(), 36);
    assert!(set.is_sign_closed());
    for (i, o) in manifest.iter().enumerate() {
        let mut neg = o.clone();
        neg.sign = o.sign.flip();
        assert_eq!(manifest[set.negation(i).unwrap()], neg);
    }
}

#[test]
fn size_cap_is_enforced() {
    let err = build_multicalib_objectives(&whole(2), grid(0.1), 8, BuildOptions::default()).unwrap_err();
    assert!(matches!(err, Error::SizeCap { .. }), "{err}");
    let big = BuildOptions { size_cap: u128::MAX };
    assert!(build_multicalib_objectives(&whole(2), grid(0.5), 16, big).is_ok());
}

#[test]
fn agnostic_count_matches_formula() {
    let set = build_agnostic_objectives(2, grid(0.5), 2, BuildOptions::default()).unwrap();
    assert_eq!(set.len(), 72);
}

#[test]
fn moment_counts_match_formula() {
    let set = build_moment_objectives(1, grid(0.5), 2, MomentDegrees::All, BuildOptions::default()).unwrap();
    assert_eq!(set.components()[0].len(), 2 * 1 * 3 * 3 * 2 * 2);
    assert_eq!(set.components()[1].len(), set.components()[0].len());
    let even = build_moment_objectives(1, grid(0.5), 2, MomentDegrees::Even, BuildOptions::default()).unwrap();
    assert_eq!(even.components()[0].len(), 36);
    assert!(build_moment_objectives(1, grid(0.5), 1, MomentDegrees::Even, BuildOptions::default()).is_err());
}

#[test]
fn descriptor_and_enumeration_agree() {
    // Every objective reported open must evaluate to the reported value,
    // and every objective with a nonzero value must be reported.
    let sets = vec![
        build_multicalib_objectives(&GroupFamily::new(2, vec![vec![0], vec![0, 1]]).unwrap(), grid(0.5), 2, BuildOptions::default()).unwrap(),
        build_agnostic_objectives(2, grid(0.5), 3, BuildOptions::default()).unwrap(),
        build_conditional_objectives(grid(0.25), 2, BuildOptions::default()).unwrap(),
        build_moment_objectives(2, grid(0.5), 3, MomentDegrees::All, BuildOptions::default()).unwrap(),
    ];
    let preds = [
        vec![vec![0.3, 0.7]],
        vec![vec![0.2, 0.3, 0.5]],
        vec![vec![1.0, 0.0]],
        vec![vec![0.6, 0.4], vec![0.1, 0.9], vec![0.25, 0.75], vec![0.5, 0.5]],
    ];
    for (set, rows) in sets.iter().zip(preds) {
        let p = Prediction::from_rows(rows).unwrap();
        for w in [GroupMask::from_indices([0]), GroupMask::from_indices([0, 1]), GroupMask::from_indices([1])] {
            for y in 0..p.signature().k {
                let mut reported = std::collections::HashMap::new();
                set.for_each_open(&p, 0, w, y, |i, v| *reported.entry(i).or_insert(0.0) += v);
                for i in 0..set.len() {
                    let direct = set.eval(i, &p, 0, w, y);
                    let listed = reported.get(&i).copied().unwrap_or(0.0);
                    assert!((direct - listed).abs() < 1e-12, "objective {i}: {direct} vs {listed}");
                    assert!((-1.0..=1.0).contains(&direct));
                }
            }
        }
    }
}

fn half_instance(n: usize) -> TabularDistribution {
    TabularDistribution::from_features(vec![1.0 / n as f64; n], whole(n), vec![vec![0.5, 0.5]; n]).unwrap()
}

#[test]
fn constant_prediction_exact_loss() {
    let d = half_instance(2);
    let set = build_multicalib_objectives(&whole(2), grid(0.5), 2, BuildOptions::default()).unwrap();
    let h = DeterministicPredictor::constant(2, single(&[1.0, 0.0]));
    let idx = (0..set.len())
        .find(|&i| {
            let o = set.descriptor(i);
            o.gates[0].bins == vec![2, 0] && o.coord == 0 && o.sign == Sign::Plus
        })
        .unwrap();
    assert!((set.exact_loss(idx, &h, &d) - 0.5).abs() < 1e-15);
    let (best, v) = set.exact_losses(&h, &d).argmax();
    assert_eq!(best, idx);
    assert!((v - 0.5).abs() < 1e-15);
}

#[test]
fn bayes_predictor_has_zero_losses() {
    let fam = GroupFamily::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
    let d = TabularDistribution::from_features(
        vec![0.2, 0.5, 0.3],
        fam.clone(),
        vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![0.75, 0.25]],
    )
    .unwrap();
    let set = build_multicalib_objectives(&fam, grid(0.25), 2, BuildOptions::default()).unwrap();
    let bayes = d.bayes_predictor();
    let losses = set.exact_losses(&bayes, &d);
    assert!(losses.entries().all(|(_, v)| v.abs() < 1e-12));
}

#[test]
fn moment_objectives_vanish_at_exact_moments() {
    let fam = GroupFamily::new(3, vec![vec![0, 1], vec![2]]).unwrap();
    let law = [0.2, 0.5, 0.9];
    let d = TabularDistribution::from_features(
        vec![0.3, 0.3, 0.4],
        fam,
        law.iter().map(|&p| vec![p, 1.0 - p]).collect(),
    )
    .unwrap();
    let set = build_moment_objectives(2, grid(0.25), 2, MomentDegrees::All, BuildOptions::default()).unwrap();
    let table = law
        .iter()
        .map(|&p| {
            // The clipped first moment E[max(y - p, 0)] is p(1-p), as is the variance.
            let var = p * (1.0 - p);
            Prediction::from_rows(vec![vec![p, 1.0 - p], vec![var, 1.0 - var], vec![var, 1.0 - var]]).unwrap()
        })
        .collect();
    let h = DeterministicPredictor::new(table).unwrap();
    let losses = set.exact_losses(&h, &d);
    assert!(losses.entries().all(|(_, v)| v.abs() < 1e-12), "{:?}", losses.argmax());
}

#[test]
fn mean_objective_ignores_moment_row_except_through_gate() {
    let set = build_moment_objectives(1, grid(0.5), 2, MomentDegrees::Even, BuildOptions::default()).unwrap();
    let a = Prediction::from_rows(vec![vec![0.3, 0.7], vec![0.1, 0.9]]).unwrap();
    let b = Prediction::from_rows(vec![vec![0.3, 0.7], vec![0.2, 0.8]]).unwrap();
    let w = GroupMask::from_indices([0]);
    for i in set.components()[0].clone() {
        assert_eq!(set.eval(i, &a, 0, w, 1), set.eval(i, &b, 0, w, 1));
    }
}

#[test]
fn agnostic_single_group_matches_multicalibration() {
    let d = TabularDistribution::from_features(vec![0.5, 0.5], whole(2), vec![vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
    let mc = build_multicalib_objectives(&whole(2), grid(0.25), 2, BuildOptions::default()).unwrap();
    let ag = build_agnostic_objectives(1, grid(0.25), 2, BuildOptions::default()).unwrap();
    let h = DeterministicPredictor::new(vec![single(&[0.3, 0.7]), single(&[0.55, 0.45])]).unwrap();
    for a in d.atoms() {
        let z = a.sample;
        for i in 0..mc.len() {
            assert_eq!(mc.eval(i, h.at(z.x), z.x, z.w, z.y), ag.eval(i, h.at(z.x), z.x, z.w, z.y));
        }
    }
}

#[test]
fn permutation_closure_negates_losses() {
    let fam = GroupFamily::new(3, vec![vec![0, 1], vec![2]]).unwrap();
    let d = TabularDistribution::from_features(
        vec![0.3, 0.3, 0.4],
        fam.clone(),
        vec![vec![0.1, 0.9], vec![0.4, 0.6], vec![0.8, 0.2]],
    )
    .unwrap();
    let set = build_multicalib_objectives(&fam, grid(0.25), 2, BuildOptions::default()).unwrap();
    assert!(set.is_permutation_closed());
    let h = DeterministicPredictor::new(vec![single(&[0.3, 0.7]), single(&[0.3, 0.7]), single(&[0.9, 0.1])]).unwrap();
    let losses = set.exact_losses(&h, &d);
    for i in 0..set.len() {
        // Coordinate swap flips bit 1 of the index for k = 2.
        let swapped = i ^ 2;
        assert!((losses.get(i) + losses.get(swapped)).abs() < 1e-12);
    }
}

#[test]
fn amplified_set_against_itself_is_zero() {
    let d = half_instance(3);
    let set = build_multicalib_objectives(&whole(3), grid(0.5), 2, BuildOptions::default()).unwrap();
    let h = DeterministicPredictor::new(vec![single(&[0.2, 0.8]), single(&[0.6, 0.4]), single(&[1.0, 0.0])]).unwrap();
    let other = DeterministicPredictor::constant(3, single(&[0.5, 0.5]));
    let amp = amplify_competitive(&set, vec![h.clone(), other]).unwrap();
    assert_eq!(amp.len(), 72);
    assert_eq!(amp.scale(), 0.5);
    for i in (0..amp.len()).filter(|i| i % 2 == 0) {
        assert!(amp.exact_loss(i, &h, &d).abs() < 1e-15);
    }
    let losses = amp.exact_losses(&h, &d);
    for i in 0..amp.len() {
        assert!((losses.get(i) - amp.exact_loss(i, &h, &d)).abs() < 1e-12);
    }
    assert!(amplify_competitive(&set, vec![]).is_err());
}

#[test]
fn filtered_set_keeps_enumeration_consistent() {
    let set = build_multicalib_objectives(&whole(2), grid(0.5), 2, BuildOptions::default()).unwrap();
    let plus = set.filter(|o| o.sign == Sign::Plus && o.coord == 0).unwrap();
    assert_eq!(plus.len(), 9);
    assert!(!plus.is_sign_closed());
    let p = single(&[0.3, 0.7]);
    let w = GroupMask::from_indices([0]);
    for y in 0..2 {
        let mut reported = std::collections::HashMap::new();
        plus.for_each_open(&p, 0, w, y, |i, v| *reported.entry(i).or_insert(0.0) += v);
        for i in 0..plus.len() {
            assert_eq!(plus.eval(i, &p, 0, w, y), reported.get(&i).copied().unwrap_or(0.0));
        }
    }
}

#[test]
fn manifest_serializes_descriptor_fields() {
    let set = build_moment_objectives(1, grid(0.5), 2, MomentDegrees::Even, BuildOptions::default()).unwrap();
    let m = set.manifest().unwrap();
    let json = serde_json::to_string(&m[m.len() - 1]).unwrap();
    assert!(json.contains("\"moment\"") && json.contains("\"moment_degree\":2"), "{json}");
    let back: LinearObjective = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m[m.len() - 1]);
}
