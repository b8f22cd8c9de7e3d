use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, flags or input files; exit status 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure after the run started; exit status 2.
    #[error("runtime error: {message}")]
    Runtime { message: String, snapshot: Option<PathBuf> },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime { .. } | Self::Io { .. } => 2,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime {
            message: e.to_string(),
            snapshot: None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
