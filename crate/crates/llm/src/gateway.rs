use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::confidence::estimate_confidence;
use crate::error::{LlmError, TemplateError};
use crate::template::{render_template, TemplateRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<(Role, String)>>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(template_id: impl Into<String>) -> Self {
        Self {
            template_id: template_id.into(),
            variables: BTreeMap::new(),
            history: None,
            max_tokens: 1024,
            temperature: 0.0,
        }
    }

    pub fn var(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.variables.insert(name.into(), value.into());
        self
    }

    pub fn with_history(mut self, history: Vec<(Role, String)>) -> Self {
        self.history = Some(history);
        self
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u32,
    pub completion: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub token_usage: TokenUsage,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        let text = text.into();
        let usage = TokenUsage { prompt: 0, completion: text.split_whitespace().count() as u32 };
        Self { text, confidence: None, token_usage: usage }
    }

    /// Backend-reported confidence, or the parsed/default estimate.
    pub fn effective_confidence(&self) -> f64 {
        self.confidence.map(|c| c.clamp(0.0, 1.0)).unwrap_or_else(|| estimate_confidence(&self.text))
    }
}

/// A fully rendered prompt, as handed to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: String,
    pub text: String,
    pub history: Vec<(Role, String)>,
    pub max_tokens: u32,
    pub temperature: f64,
}

pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<ChatResponse, LlmError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<ChatResponse, LlmError> {
        (**self).complete(prompt)
    }
}

/// Template registry plus the set of registered backends.
#[derive(Clone)]
pub struct Gateway {
    templates: Arc<TemplateRegistry>,
    backends: BTreeMap<String, Arc<dyn Backend>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("templates", &self.templates.ids().count())
            .field("backends", &self.backends.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Gateway {
    pub fn new(templates: TemplateRegistry) -> Self {
        Self { templates: Arc::new(templates), backends: BTreeMap::new() }
    }

    pub fn with_builtin_templates() -> Self {
        Self::new(TemplateRegistry::builtin())
    }

    pub fn register(&mut self, backend_id: impl Into<String>, backend: Arc<dyn Backend>) {
        self.backends.insert(backend_id.into(), backend);
    }

    pub fn with_backend(mut self, backend_id: impl Into<String>, backend: Arc<dyn Backend>) -> Self {
        self.register(backend_id, backend);
        self
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    pub fn has_backend(&self, backend_id: &str) -> bool {
        self.backends.contains_key(backend_id)
    }

    pub fn render(&self, request: &ChatRequest) -> Result<RenderedPrompt, LlmError> {
        let template = self
            .templates
            .get(&request.template_id)
            .ok_or_else(|| TemplateError::UnknownTemplate(request.template_id.clone()))?;
        let text = render_template(template, &request.variables)?;
        Ok(RenderedPrompt {
            template_id: request.template_id.clone(),
            text,
            history: request.history.clone().unwrap_or_default(),
            max_tokens: request.max_tokens,
            temperature: request.temperature,
        })
    }

    pub fn complete(&self, backend_id: &str, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let backend = self.backends.get(backend_id).ok_or_else(|| LlmError::UnknownBackend(backend_id.to_string()))?;
        let prompt = self.render(request)?;
        tracing::debug!(backend_id, template = %prompt.template_id, "completion request");
        backend.complete(&prompt)
    }
}
