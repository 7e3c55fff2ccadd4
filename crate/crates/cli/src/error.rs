use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] tofmpi_core::Error),
    #[error(transparent)]
    Model(#[from] tofmpi_gbtree::GbError),
    #[error(transparent)]
    Tuning(#[from] tofmpi_tpe::TpeError),
    #[error(transparent)]
    Eval(#[from] tofmpi_evalkit::EvalError),
    #[error(transparent)]
    Scene(#[from] tofmpi_scene::SceneError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for bad configuration or inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input(_) | Self::TomlWrite(_) => 2,
            _ => 1,
        }
    }
}
