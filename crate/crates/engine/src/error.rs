use svw_agents::AgentError;
use svw_core::CoreError;
use svw_llm::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("could not classify the request: {0}")]
    Classification(String),
    #[error("cannot build a plan: {0}")]
    Plan(String),
    #[error("plan {0} already completed")]
    AlreadyComplete(String),
    #[error("plan {plan_id} is {status}, not suspended")]
    NotSuspended { plan_id: String, status: String },
    #[error("plan {plan_id} failed at step {step}: {error}")]
    PlanFailed { plan_id: String, step: String, error: String },
    #[error("input {name} refers to artifact {id}, which cannot be read: {source}")]
    Input {
        name: String,
        id: String,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("backend error: {0}")]
    Backend(#[from] LlmError),
}

impl EngineError {
    /// Whether sending the same request again may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            EngineError::Classification(_) => true,
            EngineError::Backend(e) => e.is_retryable(),
            EngineError::Agent(e) => e.is_retryable(),
            EngineError::Core(CoreError::Backend(e)) => e.is_retryable(),
            _ => false,
        }
    }
}
