use std::sync::Arc;

use svw_core::SessionConfig;
use svw_llm::{ChatRequest, ChatResponse, Gateway};

use crate::error::AgentError;

/// What every agent operation needs to reach a model.
#[derive(Debug, Clone)]
pub struct AgentEnv {
    pub gateway: Arc<Gateway>,
    pub backend_id: String,
    pub retrieval_k: usize,
    pub confidence_threshold: f64,
    pub context_window_limit: usize,
}

impl AgentEnv {
    pub fn new(gateway: Arc<Gateway>, config: &SessionConfig) -> Self {
        Self {
            gateway,
            backend_id: config.backend_id.clone(),
            retrieval_k: config.retrieval_k as usize,
            confidence_threshold: config.confidence_threshold,
            context_window_limit: config.context_window_limit as usize,
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        Ok(self.gateway.complete(&self.backend_id, request)?)
    }
}
