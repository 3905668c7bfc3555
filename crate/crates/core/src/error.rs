use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{func}: argument {value} outside the domain ({expected})")]
    Domain {
        func: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("geometry sampling failed after {attempts} attempts for K = {k}")]
    Geometry { k: usize, attempts: usize },

    #[error("invalid perspective point: t = {t}, pbar = {pbar} (t = 0 requires pbar = 0)")]
    Perspective { t: f64, pbar: f64 },

    #[error("MRC combiner undefined for a zero channel vector")]
    ZeroChannel,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no feasible point: {0}")]
    NoFeasiblePoint(String),

    #[error("replay file: {0}")]
    Replay(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
