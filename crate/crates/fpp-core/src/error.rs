use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or quadrature failed to reach the requested tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// Invalid user-supplied configuration (ranges, dimensions, flags).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Numerical failure at runtime (non-finite values, refused update).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Training aborted because the loss became non-finite.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    /// Malformed or truncated on-disk artifact.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
