//! Executes one configured run: builds the problem, runs the dynamics,
//! audits the output exactly and assembles the report.

use multical::audit::{
    audit_agnostic, audit_conditional, audit_moment, audit_multicalibration, brute_force_opt, AuditReport,
    BruteForceConfig,
};
use multical::dynamics::{
    action_count, default_nrbr_horizon, default_nrnr_horizon, find, majority_round, run_nrbr, run_nrnr, FindMode,
    NrbrConfig, NrnrConfig, RegretLedger, Transcript,
};
use multical::instances::competitive_from;
use multical::objectives::{MomentDegrees, ObjectiveSet, ProblemKind};
use multical::players::{BestResponseConfig, Counters, OracleConfig, OracleMode};
use multical::{seeded_rng, Hypothesis, LevelGrid, MultiObjectiveProblem, TabularDistribution};
use serde::Serialize;

use crate::config::{DistributionSource, Dynamics, FindSpec, LoadedConfig, OracleSpec, RunConfig};
use crate::error::CliError;

/// Step of the brute-force search used when OPT is not known.
const BRUTE_FORCE_STEP: f64 = 0.25;

/// A problem ready to run, with what its audit needs.
pub struct PreparedProblem {
    /// The game.
    pub problem: MultiObjectiveProblem,
    /// The unconditioned law.
    pub dist: TabularDistribution,
    /// Bin grid.
    pub grid: LevelGrid,
    /// Moment degrees (moment problems).
    pub degrees: Vec<u32>,
    /// Base objectives and their minima over the class (competitive problems).
    pub competitive: Option<(ObjectiveSet, Vec<f64>)>,
}

/// Loads the configured distribution.
pub fn load_distribution(loaded: &LoadedConfig) -> Result<TabularDistribution, CliError> {
    match &loaded.config.distribution {
        DistributionSource::Path(p) => {
            let path = loaded.base_dir.join(p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Input(format!("cannot read distribution {}: {e}", path.display())))?;
            let mut de = serde_json::Deserializer::from_str(&text);
            let spec: multical::distribution::DistributionSpec = serde_path_to_error::deserialize(&mut de)
                .map_err(|e| CliError::Input(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?;
            Ok(spec.build()?)
        }
        DistributionSource::Inline(spec) => Ok(spec.clone().build()?),
    }
}

/// What defines a problem on top of its distribution.
#[derive(Debug, Clone, Copy)]
pub struct ProblemParams {
    /// Calibration variant.
    pub kind: ProblemKind,
    /// Bin width.
    pub lambda: f64,
    /// Highest moment degree (moment problems).
    pub r: u32,
    /// Calibrated moment degrees (moment problems).
    pub moment_degrees: MomentDegrees,
    /// Expected class count, checked when given.
    pub k: Option<usize>,
}

impl From<&RunConfig> for ProblemParams {
    fn from(c: &RunConfig) -> Self {
        Self { kind: c.problem, lambda: c.lambda, r: c.r, moment_degrees: c.moment_degrees, k: c.k }
    }
}

/// Builds the problem the parameters describe.
pub fn prepare(config: ProblemParams, dist: TabularDistribution) -> Result<PreparedProblem, CliError> {
    if let Some(k) = config.k {
        if k != dist.k() {
            return Err(CliError::Config(format!("field `k`: config says {k} classes, the distribution has {}", dist.k())));
        }
    }
    let grid = LevelGrid::new(config.lambda)?;
    let opts = multical::objectives::BuildOptions::default();
    let mut degrees = Vec::new();
    let mut competitive = None;
    let problem = match config.kind {
        ProblemKind::Mc => MultiObjectiveProblem::multicalibration(dist.clone(), grid, opts)?,
        ProblemKind::Agnostic => MultiObjectiveProblem::agnostic(dist.clone(), grid, opts)?,
        ProblemKind::Conditional => MultiObjectiveProblem::conditional(dist.clone(), grid, opts)?,
        ProblemKind::Moment => {
            degrees = config.moment_degrees.select(config.r);
            MultiObjectiveProblem::moment(dist.clone(), grid, config.r, config.moment_degrees, opts)?
        }
        ProblemKind::Competitive => {
            let inst = competitive_from(dist.clone(), grid)?;
            let base = inst.problem.objectives().amplified_base().expect("amplified set").clone();
            competitive = Some((base, inst.base_minima));
            inst.problem
        }
    };
    Ok(PreparedProblem { problem, dist, grid, degrees, competitive })
}

/// Exact audit of a hypothesis: the maximum violation, the witness and the
/// per-component maxima.
pub struct Audit {
    /// Audited loss.
    pub loss: f64,
    /// Achieving cell or objective, as structured text.
    pub witness: serde_json::Value,
    /// Per-component audited losses.
    pub components: Vec<f64>,
}

fn report_value(r: &AuditReport) -> serde_json::Value {
    serde_json::to_value(&r.witness).expect("witnesses serialize")
}

/// Audits `h` with the auditor matching the problem kind. Competitive
/// problems report the largest excess of a base objective over its minimum
/// on the class.
pub fn audit<H: Hypothesis + ?Sized>(prepared: &PreparedProblem, h: &H) -> Result<Audit, CliError> {
    let (dist, grid) = (&prepared.dist, &prepared.grid);
    Ok(match prepared.problem.kind() {
        ProblemKind::Mc => {
            let r = audit_multicalibration(h, dist, grid);
            Audit { loss: r.value, witness: report_value(&r), components: vec![r.value] }
        }
        ProblemKind::Agnostic => {
            let r = audit_agnostic(h, dist, grid);
            Audit { loss: r.value, witness: report_value(&r), components: vec![r.value] }
        }
        ProblemKind::Conditional => {
            let (worst, per) = audit_conditional(h, dist, grid)?;
            Audit { loss: worst.value, witness: report_value(&worst), components: per.iter().map(|r| r.value).collect() }
        }
        ProblemKind::Moment => {
            let (mean, moment) = audit_moment(h, dist, grid, &prepared.degrees)?;
            let worst = if mean.value >= moment.value { &mean } else { &moment };
            Audit { loss: worst.value, witness: report_value(worst), components: vec![mean.value, moment.value] }
        }
        ProblemKind::Competitive => {
            let (base, minima) = prepared.competitive.as_ref().expect("competitive problems carry their base set");
            let losses = base.exact_losses(h, dist);
            let (idx, excess) = (0..base.len())
                .map(|i| (i, losses.get(i) - minima[i]))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let witness = serde_json::json!({ "objective": base.descriptor(idx), "excess": excess });
            Audit { loss: excess, witness, components: vec![excess] }
        }
    })
}

/// Where the OPT value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptSource {
    /// Given in the configuration.
    Config,
    /// Zero by realizability (or by construction for competitive problems).
    Realizable,
    /// Exhaustive search over a prediction grid.
    BruteForce,
}

/// OPT per the configuration.
pub fn resolve_opt(config: &RunConfig, prepared: &PreparedProblem) -> Result<(f64, OptSource), CliError> {
    if let Some(v) = config.opt {
        return Ok((v, OptSource::Config));
    }
    if config.realizable || prepared.problem.kind() == ProblemKind::Competitive {
        return Ok((0.0, OptSource::Realizable));
    }
    let opt = brute_force_opt(&prepared.problem, BRUTE_FORCE_STEP, &BruteForceConfig::default())?;
    Ok((opt.value, OptSource::BruteForce))
}

fn oracle_config(config: &RunConfig, problem: &MultiObjectiveProblem, horizon: usize, opt: f64) -> OracleConfig {
    let (eps, delta) = (config.epsilon, config.delta);
    let g = action_count(problem);
    let mut cfg = match config.oracle {
        OracleSpec::Exact => OracleConfig::exact(),
        OracleSpec::Empirical { samples } => {
            let mut c = OracleConfig::empirical(eps, delta, g);
            if let Some(n) = samples {
                c.mode = OracleMode::Empirical { samples: n };
            }
            c
        }
        OracleSpec::Weak { c, epsilon } => OracleConfig::weak(c, epsilon.unwrap_or(eps), opt),
        OracleSpec::NoisyMax { buffer, sigma } => {
            let mut c = OracleConfig::noisy_max(eps, delta, g, horizon);
            if let OracleMode::NoisyMax { buffer: b, sigma: s } = c.mode {
                c.mode = OracleMode::NoisyMax { buffer: buffer.unwrap_or(b), sigma: sigma.unwrap_or(s) };
            }
            c
        }
    };
    cfg.delta = delta;
    cfg
}

/// Everything a run reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Configuration name.
    pub config: String,
    /// Calibration variant.
    pub problem: ProblemKind,
    /// Driver.
    pub dynamics: Dynamics,
    /// Seed of the run's generator.
    pub seed: u64,
    /// Horizon `T`.
    pub rounds: usize,
    /// Target accuracy.
    pub epsilon: f64,
    /// Failure probability.
    pub delta: f64,
    /// Bin width.
    pub lambda: f64,
    /// Classes.
    pub k: usize,
    /// Domain size.
    pub domain_size: usize,
    /// Adversary actions over all components.
    pub actions: usize,
    /// Audited loss of the output predictor.
    pub audited_loss: f64,
    /// Per-component (or per-conditional-law) audited losses.
    pub component_losses: Vec<f64>,
    /// Where the audited maximum is attained.
    pub witness: serde_json::Value,
    /// Minmax reference value.
    pub opt: f64,
    /// Its provenance.
    pub opt_source: OptSource,
    /// Allowed audited loss above OPT.
    pub tolerance: f64,
    /// Whether `audited_loss ≤ opt + tolerance`.
    pub pass: bool,
    /// Oracle calls of the run plus Find.
    pub oracle_calls: u64,
    /// Samples drawn by the run plus Find.
    pub samples: u64,
    /// Index of the iterate Find selected (best-response runs).
    pub selected_iterate: Option<usize>,
    /// Smallest audited loss over all iterates (best-response runs).
    pub best_iterate_loss: Option<f64>,
    /// Audited loss of the mixture before rounding (rounded no-regret runs).
    pub ensemble_loss: Option<f64>,
    /// Regret ledger.
    pub ledger: Option<RegretLedger>,
}

/// A finished run.
pub struct RunOutcome {
    /// Summary.
    pub report: RunReport,
    /// Full transcript.
    pub transcript: Transcript,
}

/// Runs a loaded configuration with the given seed.
pub fn execute(loaded: &LoadedConfig, seed: u64) -> Result<RunOutcome, CliError> {
    let config = &loaded.config;
    let prepared = prepare(config.into(), load_distribution(loaded)?)?;
    execute_prepared(&loaded.name, config, &prepared, seed)
}

/// Runs an already prepared problem.
pub fn execute_prepared(
    name: &str,
    config: &RunConfig,
    prepared: &PreparedProblem,
    seed: u64,
) -> Result<RunOutcome, CliError> {
    let problem = &prepared.problem;
    let (opt, opt_source) = resolve_opt(config, prepared)?;
    let horizon = match config.rounds {
        Some(t) => t,
        None => match config.dynamics {
            Dynamics::Nrnr => default_nrnr_horizon(config.epsilon, config.delta, action_count(problem))?,
            Dynamics::Nrbr => default_nrbr_horizon(config.epsilon, problem.signature().k)?,
        },
    };
    let tolerance = config.tolerance.unwrap_or(2.0 * config.epsilon);
    let mut rng = seeded_rng(seed);
    let mut selected_iterate = None;
    let mut best_iterate_loss = None;
    let mut ensemble_loss = None;
    let (audit, mut transcript, find_counters) = match config.dynamics {
        Dynamics::Nrnr => {
            let cfg = NrnrConfig {
                horizon,
                learner: config.learner,
                best_response: BestResponseConfig::new(config.resolution),
            };
            let out = run_nrnr(problem, &cfg, &mut rng)?;
            let audit = if config.majority_round {
                ensemble_loss = Some(self::audit(prepared, &out.ensemble)?.loss);
                self::audit(prepared, &majority_round(&out.ensemble, &prepared.grid)?)?
            } else {
                self::audit(prepared, &out.ensemble)?
            };
            (audit, out.transcript, Counters::default())
        }
        Dynamics::Nrbr => {
            let oracle = oracle_config(config, problem, horizon, opt);
            let out = run_nrbr(problem, &NrbrConfig { horizon, oracle }, &mut rng)?;
            let mode = match config.find {
                FindSpec::Samples => FindMode::Samples,
                FindSpec::Oracle => FindMode::Oracle(oracle),
            };
            let mut counters = Counters::default();
            let pick = find(&out.candidates, problem, config.epsilon, config.delta, mode, &mut rng, &mut counters)?;
            let best = out
                .candidates
                .iter()
                .map(|h| self::audit(prepared, h).map(|a| a.loss))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            selected_iterate = Some(pick.index);
            best_iterate_loss = Some(best);
            (self::audit(prepared, &out.candidates[pick.index])?, out.transcript, counters)
        }
    };
    transcript.seed = Some(seed);
    let ledger = if config.ledger { Some(RegretLedger::compute(&transcript, problem, Some(opt))?) } else { None };
    let report = RunReport {
        config: name.to_string(),
        problem: problem.kind(),
        dynamics: config.dynamics,
        seed,
        rounds: horizon,
        epsilon: config.epsilon,
        delta: config.delta,
        lambda: config.lambda,
        k: problem.signature().k,
        domain_size: problem.domain_size(),
        actions: action_count(problem),
        audited_loss: audit.loss,
        component_losses: audit.components,
        witness: audit.witness,
        opt,
        opt_source,
        tolerance,
        pass: audit.loss <= opt + tolerance,
        oracle_calls: transcript.counters.oracle_calls + find_counters.oracle_calls,
        samples: transcript.counters.samples + find_counters.samples,
        selected_iterate,
        best_iterate_loss,
        ensemble_loss,
        ledger,
    };
    Ok(RunOutcome { report, transcript })
}
