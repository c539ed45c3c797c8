//! CLI error type and its exit codes.

use thiserror::Error;

/// Exit code of a completed run whose audit met its target.
pub const EXIT_OK: i32 = 0;
/// Exit code of a completed run whose audit missed its target, or of a
/// failed self-test.
pub const EXIT_MISSED: i32 = 1;
/// Exit code of configuration, input and run-time errors.
pub const EXIT_ERROR: i32 = 2;

/// Failures surfaced by the commands.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration document failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),
    /// A required input is missing or malformed.
    #[error("input error: {0}")]
    Input(String),
    /// An output file could not be written.
    #[error("output error: {0}")]
    Output(String),
    /// The library rejected the problem or failed during a run.
    #[error(transparent)]
    Library(#[from] multical::Error),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        EXIT_ERROR
    }
}
