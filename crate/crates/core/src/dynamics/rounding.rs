//! Majority-vote rounding of a randomized hypothesis.
//!
//! At every point the members vote (with their mixture weights) for the bin
//! vector of their prediction; the modal bin vector wins, ties going to the
//! lexicographically smallest one. The output is the weighted mean of the
//! winning members' predictions, renormalized row by row.

use std::collections::BTreeMap;

use crate::domain::{bin_of, DeterministicPredictor, Hypothesis, LevelGrid, Prediction};
use crate::error::Result;

/// Relative tolerance under which two vote totals count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Rounds a hypothesis to a deterministic predictor by majority vote on bins.
pub fn majority_round<H: Hypothesis + ?Sized>(h: &H, grid: &LevelGrid) -> Result<DeterministicPredictor> {
    let members = h.weighted_members();
    let sig = h.signature();
    let table = (0..h.domain_size())
        .map(|x| {
            let mut votes: BTreeMap<Vec<usize>, (f64, Vec<f64>)> = BTreeMap::new();
            for &(w, m) in &members {
                let p = m.at(x);
                let entry = votes.entry(bin_of(p, grid)).or_insert_with(|| (0.0, vec![0.0; sig.len()]));
                entry.0 += w;
                entry.1.iter_mut().zip(p.values()).for_each(|(acc, v)| *acc += w * v);
            }
            // BTreeMap iterates in lexicographic order, so the first entry
            // reaching the maximum is the tie-break winner.
            let top = votes.values().map(|v| v.0).fold(0.0, f64::max);
            let (_, (weight, sum)) =
                votes.into_iter().find(|(_, v)| v.0 >= top * (1.0 - TIE_TOLERANCE)).expect("nonempty vote");
            Prediction::normalized(sig, sum.into_iter().map(|v| v / weight).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    DeterministicPredictor::new(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EnsemblePredictor;

    fn single(a: f64) -> DeterministicPredictor {
        DeterministicPredictor::constant(1, Prediction::single(vec![a, 1.0 - a]).unwrap())
    }

    #[test]
    fn identical_members_round_to_themselves() {
        let e = EnsemblePredictor::new(vec![single(0.3); 4]).unwrap();
        assert_eq!(majority_round(&e, &LevelGrid::new(0.25).unwrap()).unwrap(), single(0.3));
    }

    #[test]
    fn modal_bin_wins() {
        let e = EnsemblePredictor::new(vec![single(0.26), single(0.26), single(0.9)]).unwrap();
        let r = majority_round(&e, &LevelGrid::new(0.25).unwrap()).unwrap();
        assert!((r.at(0).row(0)[0] - 0.26).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_lexicographically_smallest_bins() {
        let e = EnsemblePredictor::new(vec![single(0.9), single(0.1)]).unwrap();
        let r = majority_round(&e, &LevelGrid::new(0.25).unwrap()).unwrap();
        assert!((r.at(0).row(0)[0] - 0.1).abs() < 1e-12);
    }
}
