use thiserror::Error;

pub type Result<T, E = SceneError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid corner scene: {0}")]
    Config(String),
    #[error("map size mismatch: {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("model expects {got} features, maps provide {expected}")]
    Schema { expected: usize, got: usize },
    #[error("malformed map file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] tofmpi_core::Error),
    #[error(transparent)]
    Model(#[from] tofmpi_gbtree::GbError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
