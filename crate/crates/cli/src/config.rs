//! Run configuration schema (version 1) and its loader.
//!
//! Configurations are JSON documents. Unknown fields are rejected, and
//! every parse error names the offending field path together with the line
//! and column where it occurred.

use std::path::{Path, PathBuf};

use multical::distribution::DistributionSpec;
use multical::dynamics::LearnerChoice;
use multical::objectives::{MomentDegrees, ProblemKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Schema version this build reads.
pub const CONFIG_VERSION: u32 = 1;

/// Which driver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// No-regret vs no-regret; the output is the mixture of iterates.
    Nrnr,
    /// No-regret vs best response; the output is the iterate Find selects.
    Nrbr,
}

/// Where the tabular law comes from: a string is a path, an object an
/// inline document.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DistributionSource {
    /// Path to a distribution file, relative to the configuration file.
    Path(PathBuf),
    /// Inline distribution document.
    Inline(DistributionSpec),
}

// Hand-written so that errors inside an inline document keep their field
// path instead of collapsing into "no variant matched".
impl<'de> Deserialize<'de> for DistributionSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct SourceVisitor;
        impl<'de> serde::de::Visitor<'de> for SourceVisitor {
            type Value = DistributionSource;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a distribution file path or an inline distribution object")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(DistributionSource::Path(PathBuf::from(v)))
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                DistributionSpec::deserialize(serde::de::value::MapAccessDeserializer::new(map))
                    .map(DistributionSource::Inline)
            }
        }
        d.deserialize_any(SourceVisitor)
    }
}

/// Adversary oracle of best-response runs. Omitted sizes default to the
/// library's formulas in `epsilon`, `delta`, the objective count and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// Exact maximization over the objective set.
    Exact,
    /// Maximization on a fresh sample batch per query.
    Empirical {
        /// Samples per distribution per query.
        #[serde(default)]
        samples: Option<usize>,
    },
    /// Weak oracle against the minmax reference.
    Weak {
        /// Fraction of the maximum an answer must reach.
        #[serde(default = "default_weak_fraction")]
        c: f64,
        /// Margin over the reference; defaults to the run's `epsilon`.
        #[serde(default)]
        epsilon: Option<f64>,
    },
    /// Report-noisy-max over one shared buffer.
    NoisyMax {
        /// Buffer size per distribution.
        #[serde(default)]
        buffer: Option<usize>,
        /// Noise standard deviation.
        #[serde(default)]
        sigma: Option<f64>,
    },
}

fn default_weak_fraction() -> f64 {
    1.0
}

/// How Find scores the candidates of a best-response run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindSpec {
    /// Empirical maxima on one fresh sample batch.
    #[default]
    Samples,
    /// One call of the run's oracle per candidate and component.
    Oracle,
}

/// A run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Schema version; must be [`CONFIG_VERSION`].
    pub version: u32,
    /// Calibration variant.
    pub problem: ProblemKind,
    /// The tabular law.
    pub distribution: DistributionSource,
    /// Driver.
    pub dynamics: Dynamics,
    /// Target accuracy ε.
    pub epsilon: f64,
    /// Failure probability δ.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Bin width λ.
    pub lambda: f64,
    /// Expected class count; checked against the distribution when given.
    #[serde(default)]
    pub k: Option<usize>,
    /// Highest moment degree of moment problems.
    #[serde(default = "default_moment_degree")]
    pub r: u32,
    /// Which moment degrees up to `r` are calibrated.
    #[serde(default)]
    pub moment_degrees: MomentDegrees,
    /// Oracle of best-response runs.
    #[serde(default = "default_oracle")]
    pub oracle: OracleSpec,
    /// Iterate selection of best-response runs.
    #[serde(default)]
    pub find: FindSpec,
    /// Horizon override; the driver's default formula otherwise.
    #[serde(default)]
    pub rounds: Option<usize>,
    /// Learner of no-regret runs.
    #[serde(default)]
    pub learner: LearnerChoice,
    /// Resolution of the grid best responder.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Majority-round the no-regret mixture before auditing.
    #[serde(default)]
    pub majority_round: bool,
    /// Allowed audited loss above OPT; `2·epsilon` when omitted.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Whether OPT is known to be zero. When false, OPT is computed by brute
    /// force (small instances only) unless `opt` is given.
    #[serde(default = "default_realizable")]
    pub realizable: bool,
    /// Explicit OPT value.
    #[serde(default)]
    pub opt: Option<f64>,
    /// Compute the regret ledger (costs one exact replay of the run).
    #[serde(default = "default_ledger")]
    pub ledger: bool,
}

fn default_delta() -> f64 {
    0.05
}
fn default_moment_degree() -> u32 {
    2
}
fn default_oracle() -> OracleSpec {
    OracleSpec::Exact
}
fn default_resolution() -> usize {
    20
}
fn default_realizable() -> bool {
    true
}
fn default_ledger() -> bool {
    true
}

/// A configuration together with the directory its relative paths resolve
/// against and a display name.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// The parsed document.
    pub config: RunConfig,
    /// Directory of the configuration file.
    pub base_dir: PathBuf,
    /// File stem, used as the configuration's name in outputs.
    pub name: String,
}

/// Parses a configuration document, naming the failing field on error.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config(format!(
            "{origin}:{}:{}: field `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    if config.version != CONFIG_VERSION {
        return Err(CliError::Config(format!(
            "{origin}: field `version`: unsupported schema version {}, expected {CONFIG_VERSION}",
            config.version
        )));
    }
    Ok(config)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse_config(&text, &path.display().to_string())?;
    Ok(LoadedConfig {
        config,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "config".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "version": 1,
  "problem": "mc",
  "distribution": "d.json",
  "dynamics": "nrnr",
  "epsilon": 0.1,
  "lambda": 0.25
}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config(MINIMAL, "t").unwrap();
        assert_eq!(c.delta, 0.05);
        assert_eq!(c.oracle, OracleSpec::Exact);
        assert!(c.realizable && c.ledger && !c.majority_round);
        assert_eq!(c.distribution, DistributionSource::Path("d.json".into()));
    }

    #[test]
    fn unknown_dynamics_names_the_field_and_line() {
        let bad = MINIMAL.replace("\"nrnr\"", "\"gradient\"");
        let err = parse_config(&bad, "t").unwrap_err().to_string();
        assert!(err.contains("field `dynamics`"), "{err}");
        assert!(err.contains("t:5:"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replace("\"lambda\"", "\"lambada\"");
        assert!(parse_config(&bad, "t").is_err());
    }

    #[test]
    fn oracle_modes_parse() {
        let c = parse_config(&MINIMAL.replace("\"lambda\": 0.25", "\"lambda\": 0.25, \"oracle\": {\"mode\": \"weak\", \"c\": 0.5}"), "t")
            .unwrap();
        assert_eq!(c.oracle, OracleSpec::Weak { c: 0.5, epsilon: None });
    }

    #[test]
    fn inline_distribution_errors_name_the_inner_field() {
        let bad = MINIMAL.replace("\"d.json\"", "{\"k\": 2, \"u\": 1, \"domain_size\": 1, \"pxx\": [1.0]}");
        let err = parse_config(&bad, "t").unwrap_err().to_string();
        assert!(err.contains("distribution"), "{err}");
        assert!(err.contains("pxx"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(parse_config(&MINIMAL.replace("\"version\": 1", "\"version\": 2"), "t").is_err());
    }
}
