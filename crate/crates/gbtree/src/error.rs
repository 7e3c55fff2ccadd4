use thiserror::Error;

pub type Result<T, E = GbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GbError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("row {row}, feature {feature}: value is not finite")]
    NonFiniteFeature { row: usize, feature: usize },
    #[error("row {row}: target is not finite")]
    NonFiniteTarget { row: usize },
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate leaf: hessian sum plus lambda is {0}")]
    Degenerate(f64),
    #[error("model schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("malformed tree {tree}: {msg}")]
    MalformedTree { tree: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
