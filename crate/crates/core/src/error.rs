use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {time} is not a node of the grid (spacing {spacing})")]
    NotANode { time: f64, spacing: f64 },

    #[error("time {time} lies outside the sampled domain [{t_min}, {t_max}]")]
    OutsideDomain { time: f64, t_min: f64, t_max: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "covariance matrix is not numerically positive definite ({nodes} nonzero nodes, H = {hurst}); \
         the grid is too fine for double precision"
    )]
    NotPositiveDefinite { nodes: usize, hurst: f64 },

    #[error("intervals do not abut: left ends at {left_end}, right starts at {right_start}")]
    IntervalMismatch { left_end: f64, right_start: f64 },

    #[error("empty window")]
    EmptyWindow,

    #[error("window of {nodes} nodes exceeds the exact-mode limit of {limit}")]
    WindowTooLarge { nodes: usize, limit: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("solver produced a non-finite state at node {node}")]
    BlowUp { node: usize },

    #[error("unknown vector field `{0}`")]
    UnknownVectorField(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
