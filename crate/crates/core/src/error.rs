use thiserror::Error;

/// Errors produced by the manipulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image too small for saliency patch ({width}x{height} < {patch})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        patch: usize,
    },

    #[error("degenerate region: mask must be neither empty nor full")]
    DegenerateRegion,

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("empty database: no admissible source patch")]
    EmptyDatabase,

    #[error("no valid target patch")]
    NoTargetPatch,

    #[error("screened Poisson solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("undefined correlation: input is constant")]
    UndefinedCorrelation,

    #[error("empty foreground in ground truth")]
    EmptyForeground,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image decode/encode: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
