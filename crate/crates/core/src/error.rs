use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A tensor quadrature rule would exceed the node budget; use a Monte-Carlo path instead.
    #[error("quadrature rule needs {requested} nodes (cap {cap}); use the Monte-Carlo path")]
    NodeCapExceeded { requested: u128, cap: usize },

    #[error("non-finite value {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("missing capability: {0}")]
    MissingCapability(&'static str),

    #[error("integration did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Tolerance { tol: f64, estimate: f64 },

    #[error("singular linear system")]
    Singular,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad caller input (CLI exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::NodeCapExceeded { .. }
                | Error::MissingCapability(_)
                | Error::Json(_)
        )
    }
}
