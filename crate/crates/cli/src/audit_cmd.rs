//! The `audit` command: exact audit of a stored predictor against a stored
//! distribution.

use std::path::Path;

use multical::objectives::ProblemKind;
use multical::{DeterministicPredictor, Prediction, Signature, TabularDistribution};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::runner::{audit, prepare, ProblemParams};

/// Stored predictor: either the library's full form or a plain table of
/// single-row predictions, one per domain point.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PredictorFile {
    /// `{"predictions": [[p_0, …, p_{k-1}], …]}`.
    Table {
        /// One probability vector per domain point.
        predictions: Vec<Vec<f64>>,
    },
    /// The library's serialized predictor.
    Full(DeterministicPredictor),
}

impl PredictorFile {
    /// Validates the file into a predictor.
    pub fn into_predictor(self) -> Result<DeterministicPredictor, CliError> {
        let table = match self {
            PredictorFile::Table { predictions } => predictions
                .into_iter()
                .map(|row| Prediction::new(Signature::new(row.len(), 1), row))
                .collect::<Result<Vec<_>, _>>()?,
            // Re-validate every entry: deserialization alone does not.
            PredictorFile::Full(p) => (0..p.domain_size())
                .map(|x| Prediction::new(p.signature(), p.at(x).values().to_vec()))
                .collect::<Result<Vec<_>, _>>()?,
        };
        Ok(DeterministicPredictor::new(table)?)
    }
}

/// Reads and validates a predictor file.
pub fn load_predictor(path: &Path) -> Result<DeterministicPredictor, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read predictor {}: {e}", path.display())))?;
    let file: PredictorFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: not a predictor file: {e}", path.display())))?;
    file.into_predictor()
}

/// Result of the `audit` command.
#[derive(Debug, Clone, Serialize)]
pub struct AuditOutput {
    /// Calibration variant audited.
    pub problem: ProblemKind,
    /// Bin width.
    pub lambda: f64,
    /// Audited loss.
    pub audited_loss: f64,
    /// Per-component (or per-conditional-law) audited losses.
    pub component_losses: Vec<f64>,
    /// Where the maximum is attained.
    pub witness: serde_json::Value,
    /// Threshold checked, when given.
    pub tolerance: Option<f64>,
    /// Whether the loss is within the threshold (true without one).
    pub pass: bool,
}

/// Audits `h` on `dist`.
pub fn run_audit(
    params: ProblemParams,
    dist: TabularDistribution,
    h: &DeterministicPredictor,
    tolerance: Option<f64>,
) -> Result<AuditOutput, CliError> {
    let prepared = prepare(params, dist)?;
    prepared.problem.check_predictor(h)?;
    let a = audit(&prepared, h)?;
    Ok(AuditOutput {
        problem: params.kind,
        lambda: params.lambda,
        audited_loss: a.loss,
        component_losses: a.components,
        witness: a.witness,
        tolerance,
        pass: tolerance.is_none_or(|t| a.loss <= t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_form_parses_and_validates() {
        let ok: PredictorFile = serde_json::from_str(r#"{"predictions": [[0.2, 0.8], [1.0, 0.0]]}"#).unwrap();
        assert_eq!(ok.into_predictor().unwrap().domain_size(), 2);
        let bad: PredictorFile = serde_json::from_str(r#"{"predictions": [[0.2, 0.9]]}"#).unwrap();
        assert!(bad.into_predictor().is_err());
    }

    #[test]
    fn full_form_roundtrips() {
        let h = DeterministicPredictor::constant(3, Prediction::new(Signature::new(2, 1), vec![0.5, 0.5]).unwrap());
        let text = serde_json::to_string(&h).unwrap();
        let back: PredictorFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_predictor().unwrap(), h);
    }
}
