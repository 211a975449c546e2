use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("{op}: argument out of domain ({detail})")]
    Domain { op: &'static str, detail: String },

    #[error("integration did not converge after {evaluations} evaluations (error estimate {error_estimate:e}, target {target:e})")]
    NonConvergence {
        evaluations: usize,
        error_estimate: f64,
        target: f64,
    },

    #[error("density-matrix element ({row}, {col}) did not converge: error estimate {error_estimate:e}, target {target:e}")]
    ElementNonConvergence {
        row: usize,
        col: usize,
        error_estimate: f64,
        target: f64,
    },

    #[error("invalid slice specification: {0}")]
    InvalidSpec(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("infeasible code construction: {0}")]
    InfeasibleCode(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate estimation problem: {0}")]
    Degenerate(String),

    #[error("malformed transcript: {0}")]
    Transcript(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
