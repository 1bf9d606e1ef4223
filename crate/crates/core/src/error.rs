//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong when setting up or running an experiment.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range (η ≤ 0, p < 1, …).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Field/grid shapes don't line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The smoothing scale is too small for the grid to resolve the kernel.
    #[error("under-resolved kernel: eta = {eta} but grid spacing h = {h} requires eta >= 2h")]
    UnderResolvedKernel { eta: f64, h: f64 },

    /// Forward-in-time smoothing would read past the final time.
    #[error("out of horizon: t = {t} with eta = {eta} needs t + eta <= {horizon}")]
    OutOfHorizon { t: f64, eta: f64, horizon: f64 },

    /// A spatial evaluation point violates the kernel-support margin.
    #[error("margin violation: {0}")]
    MarginViolation(String),

    /// A backtracked characteristic left the computational strip through an
    /// artificial face; the truncation box was chosen too small.
    #[error("truncation too small: characteristic from ({x}, t={t}) left the strip through an artificial face")]
    TruncationTooSmall { x: String, t: f64 },

    /// The exponent hypothesis 1/α = 1/β + 1/p with β ≥ p′ fails.
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// A sampled value was NaN or infinite.
    #[error("non-finite sample: {0}")]
    NonFinite(String),

    /// Unknown name in a lookup (velocity field, experiment, domain…).
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// The smoothing scale must sit below the tubular-band width.
    #[error("scale too coarse: eta = {eta} must be < band width delta = {delta}")]
    ScaleTooCoarse { eta: f64, delta: f64 },

    /// A relabeling function is not monotone where it must be inverted.
    #[error("non-monotone relabeling: {0}")]
    NonMonotone(String),

    /// A test function's support is not covered by the grid.
    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
