use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("suction overflow: water content {w} is at or below residual {w_r}")]
    SuctionOverflow { w: f64, w_r: f64 },

    #[error("non-finite value in layer {layer}: {what}")]
    Numerical { layer: usize, what: String },

    #[error("model step failed at hour {hour}: {source}")]
    Step {
        hour: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("timestamp {hour} outside trajectory of length {len}")]
    Range { hour: usize, len: usize },

    #[error("series alignment error: {0}")]
    Alignment(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("kernel matrix ill-conditioned even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("sampler aborted at iteration {iteration}: cost {value} is not finite and positive")]
    SamplerAbort { iteration: usize, value: f64 },

    #[error("improvement rate undefined: reference score is zero")]
    UndefinedRate,

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("invalid configuration at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
