//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubevoError {
    /// Invalid argument or parameter outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The deterministic system has no solution in the requested regime
    /// (logistic MLE nonexistence manifests as solver divergence).
    #[error("regime error: {0}")]
    Regime(String),

    /// A finite-sample fit diverged (logistic separation).
    #[error("separation: {0}")]
    Separation(String),

    /// The curvature matrix used by the gamma estimate is not positive definite.
    #[error("singular curvature: {0}")]
    SingularCurvature(String),

    /// An iterative routine failed to converge where convergence is guaranteed;
    /// treated as a bug signal rather than an expected outcome.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, SubevoError>;
