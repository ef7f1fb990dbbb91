use num_complex::Complex64;
use thiserror::Error;

use crate::rx::RxMeasure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is singular (smallest singular value {sigma_min:e}, largest {sigma_max:e})")]
    SingularMatrix { sigma_min: f64, sigma_max: f64 },

    #[error("quadrature order {0} outside 1..=200")]
    InvalidOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not orthogonal (residual {0:e})")]
    NotOrthogonal(f64),

    #[error("colligation is not generic: {0}")]
    NonGenericColligation(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("truncation index {k} outside 0..={m}")]
    InvalidTruncation { k: usize, m: usize },

    #[error("random generation failed after {0} attempts")]
    GenerationFailed(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("h = {0} lies inside the h = 1 band; use the N° / Ξ route")]
    SingularH(f64),

    #[error("Mellin transform diverges: 1 + bλ = {0} is not in the right half-plane")]
    BranchCut(Complex64),

    #[error("λ = {0} is within 1e-8 of a branch point")]
    BranchPoint(Complex64),

    #[error("log-grid half-width {required:.3} exceeds the limit {limit}")]
    SupportOverflow { required: f64, limit: f64 },

    #[error("tail bound {achieved:e} did not reach tolerance {tol:e} within the factor list")]
    ToleranceNotMet {
        achieved: f64,
        tol: f64,
        partial: Box<RxMeasure>,
    },

    #[error("measure is not a probability measure (mass {0})")]
    NotProbability(f64),

    #[error("quadrature dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
