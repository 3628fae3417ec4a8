use thiserror::Error;

/// Errors produced by the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid direction: |e| = {norm} (expected a unit vector)")]
    InvalidDirection { norm: f64 },

    #[error("field has nonzero mean ({mean:.3e}); operation requires a mean-zero field")]
    MeanViolation { mean: f64 },

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("degenerate segment {segment}: {samples} samples (need at least 3)")]
    DegenerateSegment { segment: usize, samples: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("degenerate norm: {count} carried modes have a vanishing multiplier under a negative exponent (first: {first:?})")]
    DegenerateNorm { count: usize, first: Vec<[i64; 3]> },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("parameter out of admissible region: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("step rejected: CFL number {cfl:.3} exceeds limit; suggested dt = {suggested_dt:.3e}")]
    StepRejected { cfl: f64, suggested_dt: f64 },

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
