use svw_hdl::HdlError;
use svw_knowledge::KnowledgeError;
use svw_llm::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend error: {0}")]
    Backend(#[from] LlmError),
    #[error("design does not parse: {0}")]
    Hdl(#[from] HdlError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no modules found in the specification outline")]
    EmptyHierarchy,
    #[error("no specification text retrieved for module {module}")]
    Summarization { module: String },
    #[error("could not parse generated output: {0}")]
    Generation(String),
    #[error("flow selection reply is not flow1, flow2 or both: {0:?}")]
    FlowSelection(String),
    #[error("threat knowledge base is empty")]
    ThreatKbMissing,
    #[error("vulnerability pattern catalog is empty")]
    CatalogMissing,
    #[error("module {module} needs {tokens} tokens, over the context window of {limit}")]
    Anchoring { module: String, tokens: usize, limit: usize },
    #[error("scenario is invalid after {rounds} rounds: {}", problems.join("; "))]
    Scenario { rounds: usize, unknown_signals: Vec<String>, problems: Vec<String> },
    #[error("testbench still fails the syntax check after {rounds} rounds: {}", diagnostics.join("; "))]
    Testbench { rounds: usize, diagnostics: Vec<String> },
    #[error("simulator failed: {0}")]
    Simulator(String),
    #[error("trace line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },
    #[error("metric error: {0}")]
    Metric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AgentError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AgentError::Io { path: path.display().to_string(), source }
    }

    /// Transient failures the orchestrator may retry with identical inputs.
    pub fn is_retryable(&self) -> bool {
        match self {
            AgentError::Backend(e) => e.is_retryable(),
            AgentError::FlowSelection(_) => true,
            _ => false,
        }
    }
}
