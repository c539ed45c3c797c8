//! Error type shared by every module of the crate.
//!
//! Construction-time validation (distributions, grids, objective sets,
//! configurations) reports through [`Error`]. Violations of hot-path
//! contracts that only a caller bug can trigger (a Hedge loss outside
//! `[-1, 1]`, a prediction evaluated against the wrong signature) panic
//! instead, with a message naming the broken contract.

use thiserror::Error;

/// Errors raised by constructors, drivers and auditors.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability table failed validation (negative mass, bad sum, shape).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A prediction row is off the simplex or has the wrong shape.
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),

    /// A group family is empty or contains an empty group.
    #[error("invalid group family: {0}")]
    InvalidGroups(String),

    /// A grid width or resolution is outside its admissible range.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two objects that must share a `(k, rows)` signature do not.
    #[error("signature mismatch: expected {expected}, found {found}")]
    SignatureMismatch {
        /// Signature required by the receiving object.
        expected: String,
        /// Signature actually supplied.
        found: String,
    },

    /// An enumeration would exceed its configured size cap.
    #[error("{what} would contain {requested} elements, above the cap of {cap}; {hint}")]
    SizeCap {
        /// What was being enumerated.
        what: &'static str,
        /// Requested element count (saturating).
        requested: u128,
        /// Configured cap.
        cap: u128,
        /// Suggested remedy.
        hint: &'static str,
    },

    /// Conditioning on a group of probability zero.
    #[error("group {0} has zero probability mass; its conditional distribution is undefined")]
    ZeroMassGroup(usize),

    /// An operation that needs a nonempty input received an empty one.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A weak oracle or weak-regret computation needs a minmax reference value.
    #[error("missing minmax reference value: {0}")]
    MissingReference(&'static str),

    /// The requested combination of problem, player and oracle is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A run-time configuration value is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An oracle failed inside a dynamics run.
    #[error("oracle failed in round {round}: {source}")]
    OracleFailure {
        /// Zero-based round index at which the oracle failed.
        round: usize,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },

    /// Reading or writing a file failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A structured-text document failed to parse or serialize.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
