use thiserror::Error;

/// Errors produced by the numerical kernels and the realization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("triangular matrix is singular (diagonal {value:e} at index {index})")]
    SingularTriangular { index: usize, value: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("vector norm {norm} is not 1")]
    NotUnitNorm { norm: f64 },

    #[error("designated component {value:e} is negative")]
    NegativePivot { value: f64 },

    #[error("pair is not standard: {0}")]
    NotStandard(String),

    #[error("pair is not row orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("pair is not in Hessenberg form: {0}")]
    NotHessenberg(String),

    #[error(
        "Stein iteration did not converge after {doublings} doublings (last residual {residual:e})"
    )]
    NotConverged { doublings: usize, residual: f64 },

    #[error("sample Grammian is singular (pivot {pivot:e} at index {index})")]
    SingularGrammian { index: usize, pivot: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
