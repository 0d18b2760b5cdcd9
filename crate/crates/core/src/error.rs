use thiserror::Error;

/// Errors raised by the geometric kernels, projections and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point violates the model embedding (defect {defect:.3e})")]
    OffManifold { defect: f64 },

    #[error("vector is not tangent at its base point (defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
