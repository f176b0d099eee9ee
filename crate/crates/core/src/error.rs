//! Error type shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while evaluating geometry or dynamics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The metric determinant fell at or below the singularity floor.
    #[error("metric is numerically singular: det g = {det:.3e} <= {floor:.3e}")]
    SingularMetric { det: f64, floor: f64 },

    /// A point failed the chart's domain guard (for example θ outside (0, π)
    /// on the sphere chart, or y <= 0 on the half-plane).
    #[error("point lies outside the chart domain")]
    OutOfChart,

    /// Vector/matrix/field arities disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation needing the (q, p) coordinate split was called on a
    /// system that never declared one.
    #[error("operation requires a canonical (q, p) split, but none is declared")]
    NoCanonicalSplit,

    /// A trajectory component exceeded the blow-up limit or became non-finite.
    #[error(
        "trajectory blew up at t = {t}: a component exceeded {limit:.1e} or became non-finite"
    )]
    BlowUp { t: f64, limit: f64 },

    /// Step size must be positive and finite.
    #[error("invalid step size dt = {dt}")]
    InvalidStep { dt: f64 },

    /// Integration span must satisfy t1 > t0.
    #[error("invalid time span: t1 = {t1} must exceed t0 = {t0}")]
    InvalidSpan { t0: f64, t1: f64 },

    /// Expression-grammar or definition-file parse failure.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }
}
