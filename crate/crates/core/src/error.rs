//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A quantity that must be non-negative came out negative beyond rounding.
    #[error("internal consistency error: {0}")]
    Consistency(String),
    /// Coincident momenta where a direction or a relative momentum is needed.
    #[error("degenerate collision: {0}")]
    Degenerate(String),
    /// Evaluation at a genuine singularity of the kernel.
    #[error("singularity: {0}")]
    Singular(String),
    /// A series or iteration failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// A linear system was too ill-conditioned to trust.
    #[error("ill-conditioned system: {0}")]
    Conditioning(String),
    /// A time step failed the stability monitor.
    #[error("stability failure: {0}")]
    Stability(String),
    /// A configuration or parameter failed validation.
    #[error("validation failure: {0}")]
    Validation(String),
    /// A NaN or infinity entered a quadrature.
    #[error("non-finite value: {0}")]
    NotFinite(String),
    /// Too few usable samples to report a statistic.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
