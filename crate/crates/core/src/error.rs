use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure surfaces of the
/// individual modules; ops only ever return the variants they document.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("Hessian is not positive definite: {0}")]
    Convexity(String),

    #[error("metric is singular")]
    SingularMetric,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("boundary point rejected: {0}")]
    Boundary(String),

    #[error("wavefunction is identically zero")]
    ZeroFunction,

    #[error("projection did not converge, moment residual {residual:e}")]
    NotInFamily { residual: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("exponent matrix is not square: {monomials} monomials, {variables} variables")]
    NotSquare { monomials: usize, variables: usize },

    #[error("exponent matrix has zero determinant")]
    ZeroDeterminant,

    #[error("polynomial is not invertible: {0}")]
    NotInvertible(String),

    #[error("weight system has a non-positive weight at index {index}")]
    NonPositiveWeight { index: usize },

    #[error("zero vector is not a projective point")]
    ZeroVector,

    #[error("no fiber solution found")]
    NoSolutionFound,

    #[error("lattice basis is singular")]
    SingularBasis,

    #[error("matrix is not symmetric/Hermitian: {0}")]
    NotSymmetric(String),

    #[error("matrix is not in the positive cone: {0}")]
    NotInCone(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
