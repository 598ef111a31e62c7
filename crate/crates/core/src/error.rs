use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavevector (0,0) is excluded from mean-zero fields")]
    ZeroWaveVector,

    #[error("wavevector ({k1},{k2}) lies outside cutoff {cutoff}")]
    OutsideCutoff { k1: i32, k2: i32, cutoff: usize },

    #[error("cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("physical grid of {grid} points cannot dealias cutoff {cutoff} (need at least {min})")]
    GridTooSmall { grid: usize, cutoff: usize, min: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solution blew up at t={time}: |v|_W = {norm:e} exceeds {limit:e}")]
    BlowUp { time: f64, norm: f64, limit: f64 },

    #[error("base trajectory missing or inconsistent: {0}")]
    MissingBase(String),

    #[error("integrand has no nabla trace")]
    MissingNabla,

    #[error("unknown product-rule example `{0}`")]
    UnknownExample(String),

    #[error("malformed field data: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("report `{0}` needs at least two levels to plot")]
    TooFewLevels(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
