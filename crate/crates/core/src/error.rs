use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators and the data plumbing around them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CureError {
    #[error("no observation within bandwidth {bandwidth} of x = {x0}")]
    EmptyWindow { x0: f64, bandwidth: f64 },

    #[error("sample has no uncensored observation")]
    NoEvents,

    #[error("sample is empty")]
    EmptySample,

    #[error("tied observed time z = {z} (strict tie mode)")]
    TiedTimes { z: f64 },

    #[error("quantile level {q} exceeds the observable mass {max} at x = {x0}")]
    QuantileOutOfRange { x0: f64, q: f64, max: f64 },

    #[error("no uncensored observation carries weight at x = {x0}")]
    NoLocalEvents { x0: f64 },

    #[error("degenerate local scale at x = {x0} (variance {variance})")]
    DegenerateScale { x0: f64, variance: f64 },

    #[error("every covariate was excluded from the error distribution average ({excluded} excluded)")]
    NoValidCovariates { excluded: usize },

    #[error("bootstrap unstable: {accepted} of {wanted} replicates succeeded after {attempts} attempts")]
    BootstrapUnstable {
        wanted: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("all {runs} Monte Carlo runs failed")]
    AllRunsFailed { runs: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: row {row}: time {z} is not positive, cannot log-transform")]
    NonPositiveTime { path: PathBuf, row: usize, z: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl CureError {
    /// True for failures of the estimators themselves, as opposed to bad
    /// input or configuration.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            CureError::EmptyWindow { .. }
                | CureError::NoEvents
                | CureError::QuantileOutOfRange { .. }
                | CureError::NoLocalEvents { .. }
                | CureError::DegenerateScale { .. }
                | CureError::NoValidCovariates { .. }
                | CureError::BootstrapUnstable { .. }
                | CureError::AllRunsFailed { .. }
        )
    }
}

impl From<std::io::Error> for CureError {
    fn from(err: std::io::Error) -> Self {
        CureError::Io(err.to_string())
    }
}

pub type Result<T, E = CureError> = std::result::Result<T, E>;
