use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested factorization would not fit in memory.
    #[error("resource error: {0}")]
    Resource(String),

    /// Non-finite values in observed or derived series.
    #[error("data error in trajectory {trajectory} at index {index}: {reason}")]
    Data {
        trajectory: usize,
        index: usize,
        reason: String,
    },

    /// The data carry no information about the target quantity.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The posterior of an effect under a zero-variance prior is a point mass.
    #[error("degenerate posterior: point mass at {point}")]
    DegeneratePosterior { point: f64 },

    #[error("simulation blow-up in trajectory {trajectory} at step {step}: |x| = {value:e} exceeds guard {guard:e}")]
    BlowUp {
        trajectory: usize,
        step: usize,
        value: f64,
        guard: f64,
    },

    /// Inputs that do not fit together (lengths, grids, provenance).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Contract(_) | Error::Format(_) | Error::Io(_) | Error::Json(_)
        )
    }
}
