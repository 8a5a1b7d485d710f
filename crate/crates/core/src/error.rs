//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, fitting, imputation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter values outside the family's domain (non-positive scale,
    /// non-positive-definite covariance, ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A function argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Complete-data maximum likelihood has no interior solution
    /// (e.g. all observations identical for a two-parameter family).
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    /// Acceptance-rejection imputation exhausted its attempt budget.
    /// Signals parameters implying a near-zero missing probability.
    #[error(
        "imputation stalled after {attempts} attempts (censor time {censor}): \
         current parameters imply a near-zero missing probability"
    )]
    ImputationStall { censor: f64, attempts: u64 },

    /// Malformed input row.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally inconsistent dataset or configuration.
    #[error("schema error: {0}")]
    Schema(String),

    /// Dataset failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Run configuration problem; `key` names the offending entry.
    #[error("configuration error: key `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("integration did not converge: achieved tolerance {achieved:e}, requested {requested:e}")]
    Integration { achieved: f64, requested: f64 },

    /// Information matrix is not positive definite; more imputations or
    /// more data are needed before standard errors are meaningful.
    #[error("information matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Every replication of a simulation study failed.
    #[error("simulation study failed: {0}")]
    Study(String),

    /// Error raised inside a specific SEM cycle.
    #[error("cycle {cycle}: {source}")]
    AtCycle {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Unwraps `AtCycle` wrappers to the root cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtCycle { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
