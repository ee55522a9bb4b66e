use std::path::Path;

use svw_engine::EngineError;
use svw_knowledge::KnowledgeError;
use svw_llm::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("mock fixtures: {0}")]
    Fixtures(#[from] LlmError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.display().to_string(), source }
    }
}
