use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped so the CLI can map them onto process exit codes:
/// parse failures, numeric precondition violations and flow aborts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve needs at least {needed} vertices, got {got}")]
    TooFewVertices { needed: usize, got: usize },

    #[error("vertices {0} and {1} coincide (zero-length segment)")]
    DegenerateSegment(usize, usize),

    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),

    #[error("exponent alpha = {0} is outside (0, 3)")]
    InvalidAlpha(f64),

    #[error("operation requires a {expected} curve")]
    Closedness { expected: &'static str },

    #[error("indices {0} and {1} must differ")]
    SameIndex(usize, usize),

    #[error("index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("points coincide (distance {0:e})")]
    CoincidentPoints(f64),

    #[error("curves intersect or touch (min distance {0:e})")]
    Intersecting(f64),

    #[error("point maps to infinity")]
    PointAtInfinity,

    #[error("point is off the unit sphere (|q| = {0})")]
    OffSphere(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("plane does not meet the light cone transversally (<p,p> = {0:e})")]
    NotTransversal(f64),

    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("flow aborted at step {step}: min self-distance {min_dist:e} below threshold {threshold:e}")]
    FlowAbort {
        step: usize,
        min_dist: f64,
        threshold: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
