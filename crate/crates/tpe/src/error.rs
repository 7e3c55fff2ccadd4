use thiserror::Error;

pub type Result<T, E = TpeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TpeError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no trial completed successfully")]
    NoCompletedTrials,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
