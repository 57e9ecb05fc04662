use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("singular cubic: discriminant {0:.6e}")]
    SingularCubic(f64),

    #[error("quadrature resolution too small: {0}")]
    Resolution(String),

    #[error("kernel vanishes at node {node} (K = {value:.3e})")]
    BaseLocus { node: usize, value: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("path integral did not converge: {0}")]
    NonConvergent(String),

    #[error("{which} half-step drop is negative at iteration {iter}: {drop:.3e}")]
    HalfStep { iter: usize, which: String, drop: f64 },

    #[error("Z_tilde increased at iteration {iter}: {before:.17e} -> {after:.17e}")]
    Monotonicity { iter: usize, before: f64, after: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
