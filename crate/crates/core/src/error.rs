use thiserror::Error;

use crate::recovery::SpanBasis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("matrix is not Hermitian (max |A - A*| entry = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("eigenvalue {eigenvalue} lies within {tolerance:e} of threshold {threshold}")]
    EigenvalueNearThreshold {
        eigenvalue: f64,
        threshold: f64,
        tolerance: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("strict mode violated at level {level}: subrank {subrank} < required {required}")]
    StrictModeViolation {
        level: usize,
        subrank: usize,
        required: usize,
    },

    #[error("level {level}: subrank {subrank} below row capacity {required}")]
    InsufficientSubrank {
        level: usize,
        subrank: usize,
        required: usize,
    },

    #[error("degenerate witness at level {level}: norm {norm:e} below 1e-10 (try another generator seed)")]
    DegenerateWitness { level: usize, norm: f64 },

    #[error("no spectral gap: {0}")]
    NoSpectralGap(String),

    #[error("repeated squaring did not converge after {squarings} squarings (last change {last_change:e})")]
    NonConvergence { squarings: usize, last_change: f64 },

    #[error("ladder breakdown at level {level}, row {row}: partial isometry norm {norm:e}")]
    LadderBreakdown { level: usize, row: usize, norm: f64 },

    #[error("closure did not stabilize within word cap {word_cap} (partial dimension {})", .partial.len())]
    CapExceeded {
        word_cap: usize,
        partial: Box<SpanBasis>,
    },

    #[error("stabilization failed: {0}")]
    StabilizationFailed(String),

    #[error("word index {index} out of range for a {arity}-tuple")]
    IndexOutOfRange { index: usize, arity: usize },

    #[error("subrank {subrank} smaller than required matrix order {n}")]
    SubrankTooSmall { subrank: usize, n: usize },
}
