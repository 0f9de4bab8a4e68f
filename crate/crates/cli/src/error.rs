use std::path::Path;

use thiserror::Error;

/// Exit status for I/O failures.
pub const EXIT_IO: i32 = 1;
/// Exit status for bad flags, schema or invariant violations.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures and fits that did not converge.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status of `diagnose` when the non-expansion condition fails.
pub const EXIT_GATE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Parse { row: usize, column: String, value: String },

    #[error("row {row} (patient `{patient}`): {message}")]
    Invariant { row: usize, patient: String, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] qshared_core::Error),

    #[error("fit stopped with status {0} after {1} iterations")]
    NotConverged(String, usize),

    #[error("hat-matrix infinity norm {0} exceeds 1: convergence not guaranteed")]
    Gate(f64),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        CliError::Io { path: "<csv>".into(), message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::NotConverged(..) => EXIT_NUMERICAL,
            CliError::Gate(_) => EXIT_GATE,
            _ => EXIT_VALIDATION,
        }
    }
}
