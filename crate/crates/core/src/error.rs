use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the library. Numerical checks that merely fail a bound
/// are reported through [`crate::verify::CheckReport`], not through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("schur iteration did not converge after {iterations} iterations (active block {lo}..={hi})")]
    SchurNoConvergence { iterations: usize, lo: usize, hi: usize },

    #[error("parameter {0} lies outside [0, 1]")]
    ParameterOutOfRange(String),

    #[error("point {re}{im:+}i lies outside the curve square of half-side {half_side}")]
    PointOutsideSquare { re: f64, im: f64, half_side: f64 },

    #[error("curve does not separate the spectrum: {0}")]
    CurveCollision(String),

    #[error("eigenvalue cluster at {re}{im:+}i straddles the region boundary")]
    AmbiguousCluster { re: f64, im: f64 },

    #[error("projection corner has rank zero")]
    EmptyCorner,

    #[error("projection is not invariant: |(I-P)TP| = {residual:e} exceeds {bound:e}")]
    NotInvariant { residual: f64, bound: f64 },

    #[error("open set components overlap: {0}")]
    OverlappingComponents(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: &'static str, msg: String },

    #[error("invalid ensemble parameters: {0}")]
    InvalidEnsemble(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Parse { what, msg: msg.into() }
    }

    pub(crate) fn ambiguous(z: Complex64) -> Self {
        Error::AmbiguousCluster { re: z.re, im: z.im }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
