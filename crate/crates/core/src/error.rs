use svw_llm::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("turn index {got} does not follow transcript length {expected}")]
    Sequence { expected: usize, got: usize },
    #[error("backend error: {0}")]
    Backend(#[from] LlmError),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("{what} {id} not found")]
    NotFound { what: &'static str, id: String },
    #[error("plan dataflow error: {0}")]
    Dataflow(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record in {path}: {source}")]
    Serde {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CoreError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn serde(path: &std::path::Path, source: serde_json::Error) -> Self {
        CoreError::Serde { path: path.display().to_string(), source }
    }
}
