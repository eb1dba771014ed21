use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension {dim} exceeds the configured capacity {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("gap {gap:.3e} at s = {s} is below the filter scale {required:.3e}")]
    Gap { s: f64, gap: f64, required: f64 },

    #[error("gap {gap:.3e} below floor {floor:.3e} at s = {s}; last valid s = {last_valid}")]
    GapCollapse {
        s: f64,
        gap: f64,
        floor: f64,
        last_valid: f64,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;
