use thiserror::Error;

/// Errors produced by the xorq library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid interval: lower bound {lo} exceeds upper bound {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Phase 1 needs a degree-1 answer for every label.
    #[error("label {label} has no degree-1 initialization query")]
    MissingInitialization { label: usize },

    #[error("exhaustive decoding over {m} labels exceeds the limit of {max}")]
    SizeGuard { m: usize, max: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("zero denominator: no query carries information about the labels")]
    ZeroDenominator,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than by the data
    /// or the environment.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidInterval { .. }
                | Error::HypothesisViolation(_)
                | Error::ZeroDenominator
                | Error::SizeGuard { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
