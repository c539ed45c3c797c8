//! The `selftest` command: fast structural checks of the library on the
//! bundled and random instances.

use multical::audit::{audit_multicalibration, brute_force_opt, BruteForceConfig};
use multical::dynamics::{majority_round, run_nrnr, NrnrConfig};
use multical::instances::{mc_small, mc_small_problem, random_mc, MC_SMALL_LAMBDA};
use multical::objectives::BuildOptions;
use multical::players::{best_response, realized_regret, BestResponseConfig, HedgeState};
use multical::{seeded_rng, DeterministicPredictor, LevelGrid, MultiObjectiveProblem, Prediction, Signature, TabularDistribution};
use rand::Rng;
use serde::Serialize;

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Short name.
    pub name: &'static str,
    /// Whether it held.
    pub pass: bool,
    /// What was measured.
    pub detail: String,
}

type CheckResult = Result<(bool, String), multical::Error>;

fn random_predictor<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<DeterministicPredictor, multical::Error> {
    let table = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            Prediction::normalized(Signature::new(k, 1), raw.iter().map(|v| v / s).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    DeterministicPredictor::new(table)
}

fn bayes_is_calibrated() -> CheckResult {
    let d = mc_small();
    let v = audit_multicalibration(&d.bayes_predictor(), &d, &LevelGrid::new(MC_SMALL_LAMBDA)?).value;
    Ok((v.abs() < 1e-12, format!("audit of the Bayes predictor = {v:e}")))
}

fn audit_matches_objectives() -> CheckResult {
    let mut rng = seeded_rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = random_mc(4, 2, 3, &mut rng)?;
        let grid = LevelGrid::new(0.25)?;
        let p = MultiObjectiveProblem::multicalibration(d.clone(), grid, BuildOptions::default())?;
        let h = random_predictor(4, 3, &mut rng)?;
        worst = worst.max((audit_multicalibration(&h, &d, &grid).value - p.multi_objective_loss(&h).1).abs());
    }
    Ok((worst < 1e-12, format!("largest |audit − max objective loss| = {worst:e}")))
}

fn best_response_guarantee() -> CheckResult {
    let mut rng = seeded_rng(12);
    let p = mc_small_problem();
    let r = 10;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let raw: Vec<f64> = (0..p.num_actions(0)).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|v| v / s).collect();
        worst = worst.max(best_response(&p, 0, &q, BestResponseConfig::new(r), None)?.worst_value());
    }
    Ok((worst <= 1.0 / r as f64 + 1e-12, format!("largest per-point value {worst:.4} vs 1/r = {:.4}", 1.0 / r as f64)))
}

fn opt_is_nonnegative() -> CheckResult {
    let mut rng = seeded_rng(13);
    let mut least = f64::INFINITY;
    for _ in 0..5 {
        let p = MultiObjectiveProblem::multicalibration(random_mc(2, 2, 2, &mut rng)?, LevelGrid::new(0.5)?, BuildOptions::default())?;
        least = least.min(brute_force_opt(&p, 0.25, &BruteForceConfig::default())?.value);
    }
    Ok((least >= -1e-12, format!("smallest brute-force OPT = {least:e}")))
}

fn hedge_meets_its_bound() -> CheckResult {
    let mut rng = seeded_rng(14);
    let (n, t) = (16, 500);
    let mut hedge = HedgeState::new(n, t)?;
    let (mut plays, mut losses) = (Vec::new(), Vec::new());
    for _ in 0..t {
        plays.push(hedge.distribution());
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        hedge.update(&l);
        losses.push(l);
    }
    let regret = realized_regret(&plays, &losses);
    let bound = 2.0 * (t as f64 * (n as f64).ln()).sqrt();
    Ok((regret <= bound, format!("regret {regret:.2} vs bound {bound:.2}")))
}

fn runs_are_deterministic() -> CheckResult {
    let p = mc_small_problem();
    let jsonl = |seed| -> Result<Vec<u8>, multical::Error> {
        let out = run_nrnr(&p, &NrnrConfig::new(50), &mut seeded_rng(seed))?;
        let mut buf = Vec::new();
        out.transcript.write_jsonl(&mut buf)?;
        Ok(buf)
    };
    let (a, b) = (jsonl(5)?, jsonl(5)?);
    Ok((a == b, format!("two seed-5 transcripts of {} bytes {}", a.len(), if a == b { "match" } else { "differ" })))
}

fn distribution_roundtrips() -> CheckResult {
    let d = mc_small();
    let text = serde_json::to_string(&d.to_spec()).map_err(|e| multical::Error::InvalidConfig(e.to_string()))?;
    let back = TabularDistribution::from_json(&text)?;
    Ok((back.to_spec() == d.to_spec(), "JSON → law → JSON".to_string()))
}

fn majority_round_is_deterministic_and_accurate() -> CheckResult {
    let p = mc_small_problem();
    let grid = LevelGrid::new(MC_SMALL_LAMBDA)?;
    let out = run_nrnr(&p, &NrnrConfig::new(2000), &mut seeded_rng(6))?;
    let a = majority_round(&out.ensemble, &grid)?;
    let b = majority_round(&out.ensemble, &grid)?;
    let loss = audit_multicalibration(&a, p.base(), &grid).value;
    Ok((a == b && loss <= 0.2, format!("rounded audit {loss:.4} (≤ 0.2), repeatable: {}", a == b)))
}

/// Runs every check.
pub fn run_selftest() -> Vec<Check> {
    let checks: [(&'static str, fn() -> CheckResult); 8] = [
        ("bayes_audit_zero", bayes_is_calibrated),
        ("audit_objective_duality", audit_matches_objectives),
        ("best_response_guarantee", best_response_guarantee),
        ("opt_nonnegative", opt_is_nonnegative),
        ("hedge_regret_bound", hedge_meets_its_bound),
        ("determinism", runs_are_deterministic),
        ("distribution_roundtrip", distribution_roundtrips),
        ("majority_round", majority_round_is_deterministic_and_accurate),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((pass, detail)) => Check { name, pass, detail },
            Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
        })
        .collect()
}
