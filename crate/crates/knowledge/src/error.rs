#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("vector has {got} dimensions, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("web search is not configured")]
    SearchUnavailable,
    #[error("no knowledge stores available")]
    NoStores,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store data in {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

impl KnowledgeError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        KnowledgeError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn corrupt(path: &std::path::Path, reason: impl Into<String>) -> Self {
        KnowledgeError::Corrupt { path: path.display().to_string(), reason: reason.into() }
    }
}
