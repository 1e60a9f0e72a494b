use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate activations: centered data is identically zero")]
    DegenerateActivations,

    #[error("newton-schulz iteration diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("matrix has zero frobenius norm")]
    ZeroNorm,

    #[error("jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("eigenvalue {value:e} is below the inverse square root threshold {threshold:e}")]
    EigenvalueTooSmall { value: f64, threshold: f64 },

    #[error("spectral cross-check failed: closed form and direct eigenvalues differ by {deviation:e}")]
    CrossCheck { deviation: f64 },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
}
