use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value produced at node {node}")]
    NonFinite { node: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("kernel validation failed: {}", failed.join(", "))]
    KernelValidation { failed: Vec<String> },

    #[error("kernel not resolved: spacing {spacing} must be below the support radius {radius}")]
    KernelUnresolved { spacing: f64, radius: f64 },

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("discrete system is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("verdict for {case} fell in the gap zone (relative distance {distance:.3e})")]
    VerdictGap { case: String, distance: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
