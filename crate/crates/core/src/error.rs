//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// LFSR cycle closed before reaching length 2^degree - 1, so the tap
    /// polynomial is not primitive.
    #[error("sequence is not maximal length: period {period} < {expected} (non-primitive taps?)")]
    NotMaximalLength { period: usize, expected: usize },

    #[error("LFSR seed state must be nonzero")]
    ZeroSeed,

    #[error("order {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("open fraction {0} must lie in (0, 1)")]
    BadFraction(f64),

    #[error("pinhole width {width} exceeds pattern length {len}")]
    WidthTooLarge { width: usize, len: usize },

    #[error("mask has the wrong form for this operation: expected {expected}")]
    WrongForm { expected: &'static str },

    #[error("mask does not cover the field of view: needs [{needed_lo:.3}, {needed_hi:.3}] um, extends [{mask_lo:.3}, {mask_hi:.3}] um")]
    OutOfFieldOfView {
        needed_lo: f64,
        needed_hi: f64,
        mask_lo: f64,
        mask_hi: f64,
    },

    #[error("supersampling grid is degenerate: {0}")]
    BadSampling(String),

    #[error("dense transfer build too large: N={n}, M={m} (limit {limit})")]
    TooLarge { n: usize, m: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("input matrix is zero; no rank-1 factor to extract")]
    ZeroInput,

    #[error("shared calibration factors disagree: min |<v_i, v_j>| = {alignment:.6} < {threshold}")]
    InconsistentFactor { alignment: f64, threshold: f64 },

    #[error("calibration capture missing: {0}")]
    MissingCapture(String),

    #[error("all singular values fall below the truncation cutoff")]
    AllSingularValuesTruncated,

    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("linear algebra backend failure: {0}")]
    Linalg(String),

    #[error("unsupported or malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
