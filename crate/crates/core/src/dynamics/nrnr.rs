//! No-regret vs no-regret dynamics.
//!
//! Every round, each component's adversary plays its Hedge mixture over
//! `(distribution, objective)` actions; the learner answers; one sample is
//! drawn from every distribution; the adversaries update on the
//! single-sample payoffs of every action, and the learner updates on its
//! own loss. The uniform mixture over the learner's plays is returned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::payoff::{action_payoffs, mixed_payoff, sample_atoms};
use super::transcript::{play_view, AdversaryRecord, DynamicsKind, LearnerPlay, RoundRecord, Transcript};
use crate::domain::{DeterministicPredictor, MixturePredictor};
use crate::error::{Error, Result};
use crate::objectives::{MultiObjectiveProblem, ProblemKind, SparseLosses};
use crate::players::best_response::grid_size;
use crate::players::{best_response, lazy_update, AdversaryPlay, BestResponseConfig, Counters, HedgeState, PointLazyLearner};

/// Which learner plays against the Hedge adversaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerChoice {
    /// Grid best response for single-component problems with `k ≤ 3` whose
    /// grid fits the cap; Hedge over the class for competitive problems;
    /// the lazy learner otherwise.
    #[default]
    Auto,
    /// The randomized grid best responder.
    BestResponse,
    /// The per-point lazy learner.
    Lazy,
}

/// Configuration of a no-regret-vs-no-regret run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrnrConfig {
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Learner selection.
    pub learner: LearnerChoice,
    /// Grid best-responder configuration.
    pub best_response: BestResponseConfig,
}

impl NrnrConfig {
    /// `T` rounds with the automatic learner and resolution 20.
    pub fn new(horizon: usize) -> Self {
        Self { horizon, learner: LearnerChoice::Auto, best_response: BestResponseConfig::new(20) }
    }
}

/// Result of a no-regret-vs-no-regret run.
#[derive(Debug, Clone)]
pub struct NrnrOutcome {
    /// Uniform mixture over the learner's plays.
    pub ensemble: MixturePredictor,
    /// Full transcript.
    pub transcript: Transcript,
}

enum Learner {
    Grid(BestResponseConfig),
    Lazy(PointLazyLearner),
    Class(ClassLearner),
}

/// Hedge over an explicit class, for amplified (competitive) sets.
struct ClassLearner {
    class: Vec<DeterministicPredictor>,
    hedge: HedgeState,
    /// Exact base losses of every class member.
    base_losses: Vec<SparseLosses>,
    scale: f64,
    base_len: usize,
}

impl ClassLearner {
    fn new(problem: &MultiObjectiveProblem, horizon: usize) -> Result<Self> {
        let set = problem.objectives();
        let (base, class) = match (set.amplified_base(), set.baselines()) {
            (Some(b), Some(c)) => (b, c.to_vec()),
            _ => return Err(Error::Unsupported("class learners need an amplified objective set".into())),
        };
        let dist = &problem.distributions()[0];
        let base_losses = class.iter().map(|m| base.exact_losses(m, dist)).collect();
        Ok(Self { hedge: HedgeState::new(class.len(), horizon)?, class, base_losses, scale: set.scale(), base_len: base.len() })
    }

    /// Exact loss of every member against the mixture `q` over amplified
    /// objectives `i·|H| + b`: `scale · (Σ_i Q_i L_i(h) − Σ_{i,b} q_{i,b} L_i(h_b))`.
    fn losses(&self, q: &[f64]) -> Vec<f64> {
        let h = self.class.len();
        let mut marginal = vec![0.0; self.base_len];
        for (i, m) in marginal.iter_mut().enumerate() {
            *m = q[i * h..(i + 1) * h].iter().sum();
        }
        let baseline_term: f64 = (0..h)
            .map(|b| {
                let mut e: Vec<(usize, f64)> = self.base_losses[b].entries().collect();
                e.sort_unstable_by_key(|x| x.0);
                e.into_iter().map(|(i, l)| q[i * h + b] * l).sum::<f64>()
            })
            .sum();
        self.base_losses
            .iter()
            .map(|l| {
                let mut e: Vec<(usize, f64)> = l.entries().collect();
                e.sort_unstable_by_key(|x| x.0);
                let own: f64 = e.into_iter().map(|(i, v)| marginal[i] * v).sum();
                (self.scale * (own - baseline_term)).clamp(-1.0, 1.0)
            })
            .collect()
    }
}

fn choose_learner(problem: &MultiObjectiveProblem, cfg: &NrnrConfig) -> Result<Learner> {
    let set = problem.objectives();
    let sig = problem.signature();
    let grid_fits = problem.num_components() == 1
        && set.supports_row_visits()
        && sig.k <= 3
        && grid_size(sig.k, cfg.best_response.resolution) <= cfg.best_response.grid_cap as u128;
    let lazy = || PointLazyLearner::new(sig, problem.domain_size(), cfg.horizon).map(Learner::Lazy);
    if problem.kind() == ProblemKind::Competitive || !set.supports_row_visits() {
        return match cfg.learner {
            LearnerChoice::Auto => Ok(Learner::Class(ClassLearner::new(problem, cfg.horizon)?)),
            other => Err(Error::Unsupported(format!("learner {other:?} on amplified objective sets"))),
        };
    }
    match cfg.learner {
        LearnerChoice::Auto if grid_fits => Ok(Learner::Grid(cfg.best_response)),
        LearnerChoice::Auto | LearnerChoice::Lazy => lazy(),
        LearnerChoice::BestResponse if problem.num_components() == 1 => Ok(Learner::Grid(cfg.best_response)),
        LearnerChoice::BestResponse => {
            Err(Error::Unsupported("the grid best responder plays single-component problems only".into()))
        }
    }
}

/// Runs `cfg.horizon` rounds of no-regret vs no-regret dynamics.
pub fn run_nrnr<R: Rng + ?Sized>(problem: &MultiObjectiveProblem, cfg: &NrnrConfig, rng: &mut R) -> Result<NrnrOutcome> {
    let horizon = cfg.horizon;
    if horizon < 1 {
        return Err(Error::InvalidConfig("the horizon T must be at least 1".into()));
    }
    let b = problem.num_components();
    let mut adversaries =
        (0..b).map(|c| HedgeState::new(problem.num_actions(c), horizon)).collect::<Result<Vec<_>>>()?;
    let mut learner = choose_learner(problem, cfg)?;
    let mut counters = Counters::default();
    let mut records = Vec::with_capacity(horizon);
    let mut class_weights: Vec<f64> = Vec::new();
    for t in 0..horizon {
        let qs: Vec<Vec<f64>> = adversaries.iter().map(|a| a.distribution()).collect();
        let play = match &mut learner {
            Learner::Grid(br) => {
                let response = best_response(problem, 0, &qs[0], *br, None)?;
                LearnerPlay::Predictor(response.realize(rng))
            }
            Learner::Lazy(l) => LearnerPlay::Predictor(l.predictor()),
            Learner::Class(c) => LearnerPlay::Mixture(c.hedge.distribution()),
        };
        let samples = problem.sample_round(rng);
        counters.samples += samples.len() as u64;
        let record_view = RoundRecord {
            round: t,
            learner: play,
            adversary: Vec::new(),
            samples,
            realized: Vec::new(),
        };
        let payoffs = {
            let class = match &learner {
                Learner::Class(c) => Some(c.class.as_slice()),
                _ => None,
            };
            let view = play_view(&record_view.learner, class);
            action_payoffs(problem, &view, &sample_atoms(&record_view.samples))
        };
        let realized: Vec<f64> = (0..b).map(|c| mixed_payoff(&payoffs[c], &qs[c])).collect();
        for (c, adversary) in adversaries.iter_mut().enumerate() {
            let mut entries: Vec<(usize, f64)> = payoffs[c].entries().map(|(a, v)| (a, -v)).collect();
            entries.sort_unstable_by_key(|e| e.0);
            adversary.update_sparse(entries);
        }
        match (&mut learner, &record_view.learner) {
            (Learner::Lazy(l), LearnerPlay::Predictor(h)) => {
                let plays: Vec<AdversaryPlay> = qs.iter().map(|q| AdversaryPlay::Mixed(q)).collect();
                lazy_update(l, problem, &plays, h)?;
            }
            (Learner::Class(c), LearnerPlay::Mixture(w)) => {
                if class_weights.is_empty() {
                    class_weights = vec![0.0; w.len()];
                }
                class_weights.iter_mut().zip(w).for_each(|(acc, p)| *acc += p);
                let losses = c.losses(&qs[0]);
                c.hedge.update(&losses);
            }
            _ => {}
        }
        records.push(RoundRecord {
            adversary: qs.into_iter().map(AdversaryRecord::Mixed).collect(),
            realized,
            ..record_view
        });
    }
    let (ensemble, learner_class) = match learner {
        Learner::Class(c) => {
            let total: f64 = class_weights.iter().sum();
            let weights = class_weights.iter().map(|w| w / total).collect();
            (MixturePredictor::new(c.class.clone(), weights)?, Some(c.class))
        }
        _ => {
            let members: Vec<DeterministicPredictor> = records
                .iter()
                .map(|r| match &r.learner {
                    LearnerPlay::Predictor(h) => h.clone(),
                    LearnerPlay::Mixture(_) => unreachable!("deterministic learners play predictors"),
                })
                .collect();
            let n = members.len();
            (MixturePredictor::new(members, vec![1.0 / n as f64; n])?, None)
        }
    };
    let transcript = Transcript { kind: DynamicsKind::Nrnr, seed: None, horizon, records, learner_class, counters };
    Ok(NrnrOutcome { ensemble, transcript })
}
