use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown catalog entry {0:?}")]
    UnknownManifold(String),
    #[error("invalid model: {0}")]
    ModelInvalid(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("inconsistency: {0}")]
    Inconsistent(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("convention violation: {0}")]
    Convention(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
