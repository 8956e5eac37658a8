use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("element outside the principal logarithm chart: eigenvalue {eigenvalue} lies on (-inf, 0]")]
    OutOfChart { eigenvalue: Complex64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("refused: {reason} (estimated cost {cost} evaluations)")]
    Refused { reason: String, cost: f64 },

    #[error("resample required: {0}")]
    Resample(String),

    #[error("missing sup envelope: {0}")]
    MissingEnvelope(String),

    #[error("continuation diverged at step {step}: error estimate {estimate:e} exceeds budget {budget:e}")]
    ContinuationDiverged {
        step: usize,
        estimate: f64,
        budget: f64,
        /// Serialized partial continuation state up to the failing step.
        partial: Box<crate::extend::ContinuationState>,
    },

    #[error("no admissible curve found between the two elements")]
    Unbounded,

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
