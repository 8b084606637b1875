use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode index {0}; expected 1, 2 or 3")]
    InvalidMode(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank {rank} out of range for mode {mode} of size {size}")]
    RankOutOfRange { mode: usize, rank: usize, size: usize },
    #[error("threshold too high for mode {mode}: no singular value exceeds {threshold:e}")]
    ThresholdTooHigh { mode: usize, threshold: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("point coincides with the camera center")]
    PointAtCenter,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("insufficient constraints: {have} independent equations, need at least {need}")]
    InsufficientConstraints { have: usize, need: usize },
    #[error("rank-deficient design matrix: numerical rank {rank}, need {need}")]
    RankDeficientDesign { rank: usize, need: usize },
    #[error("ambiguous sign vote: {positive} positive, {negative} negative")]
    AmbiguousSign { positive: usize, negative: usize },
    #[error("too few samples: {samples} samples of dimension {dim}")]
    TooFewSamples { samples: usize, dim: usize },
    #[error("zero sample at index {0}")]
    ZeroSample(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cameras {0:?} appear in no observed block")]
    OrphanCameras(Vec<usize>),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// `true` for failures of the numerical algorithms themselves, as opposed
    /// to malformed input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_)
            | Error::ThresholdTooHigh { .. }
            | Error::Degenerate(_)
            | Error::RankDeficientDesign { .. }
            | Error::AmbiguousSign { .. }
            | Error::ZeroSample(_) => true,
            Error::Iteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
