use std::path::PathBuf;

/// Errors raised by the spectral computations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("eigenvalue must be strictly positive, got {0}")]
    NonPositiveEigenvalue(f64),

    #[error("root order N={0} outside the supported range 1..=64")]
    RootOrderOutOfRange(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "density bound violated: sup|lambda*sigma| = {bound:.6} must be < 1 (lambda = {lambda}, sup|sigma| = {sup})"
    )]
    DensityBound { lambda: f64, sup: f64, bound: f64 },

    #[error("profile does not match the basis dimension: {0}")]
    ProfileDimension(String),

    #[error(
        "quadrature did not converge: {panels} panels, deviation {deviation:.3e} exceeds tolerance {tolerance:.1e}"
    )]
    QuadratureNonConvergence {
        panels: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("perturbative order {requested} exceeds the available maximum {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("sum rule of order s = {s} diverges for a {dimension}D spectrum (requires s > {threshold})")]
    DivergentOrder {
        s: f64,
        dimension: usize,
        threshold: f64,
    },

    #[error(
        "mass matrix is not positive definite (pivot {pivot} at row {row}); the density bound sup|lambda*sigma| < 1 is violated"
    )]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("eigensolver failed to converge at index {0}")]
    EigenNoConvergence(usize),

    #[error("insufficient data for the order fit: {usable} usable points, at least {required} required")]
    InsufficientData { usable: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cache file {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::EigenNoConvergence(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
