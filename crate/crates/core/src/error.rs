use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("invalid interval: start {start} is not before end {end}")]
    InvalidInterval { start: String, end: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need {needed} tweets, window has {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("graph is disconnected ({components} components); run per component")]
    Disconnected { components: usize },

    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("mismatched sample sets: {0}")]
    Mismatch(String),

    #[error("malformed report document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
