//! Remote chat-completion adapter.
//!
//! Speaks a JSON wire format with `model`, `messages`, `max_tokens` and
//! `temperature`. The reply text is read from `choices[0].message.content`.

use std::time::Duration;

use serde_json::{json, Value};

use crate::error::LlmError;
use crate::gateway::{Backend, ChatResponse, RenderedPrompt, Role, TokenUsage};

pub const MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(120),
            max_retries: MAX_RETRIES,
        }
    }

    /// Reads `SVW_BACKEND_URL`, `SVW_BACKEND_KEY` and `SVW_BACKEND_MODEL`.
    /// Returns `None` when no URL is configured.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("SVW_BACKEND_URL").ok().filter(|u| !u.is_empty())?;
        let model = std::env::var("SVW_BACKEND_MODEL").unwrap_or_else(|_| "default".into());
        let mut cfg = Self::new(url, model);
        cfg.api_key = std::env::var("SVW_BACKEND_KEY").ok().filter(|k| !k.is_empty());
        Some(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
}

/// One HTTP POST. Split out so retry logic can be tested without a server.
pub trait Transport: Send + Sync {
    fn post(&self, config: &RemoteConfig, body: &[u8]) -> Result<HttpReply, TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default)]
pub struct HttpTransport {
    agent: std::sync::OnceLock<ureq::Agent>,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

fn transport_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Connect(other.to_string()),
    }
}

impl Transport for HttpTransport {
    fn post(&self, config: &RemoteConfig, body: &[u8]) -> Result<HttpReply, TransportError> {
        let agent = self.agent.get_or_init(|| {
            ureq::Agent::config_builder()
                .timeout_global(Some(config.timeout))
                .http_status_as_error(false)
                .build()
                .into()
        });
        let mut req = agent.post(&config.url).header("content-type", "application/json");
        if let Some(key) = &config.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(transport_error)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport_error)?;
        Ok(HttpReply { status, body })
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("url", &self.config.url).field("model", &self.config.model).finish()
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        Self::with_transport(config, Box::new(HttpTransport::new()))
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Self {
        Self { config, transport }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Serialized request body. Built once per call and reused verbatim on retry.
    pub fn request_body(&self, prompt: &RenderedPrompt) -> Vec<u8> {
        let mut messages: Vec<Value> =
            prompt.history.iter().map(|(role, text)| json!({"role": role.as_str(), "content": text})).collect();
        messages.push(json!({"role": Role::User.as_str(), "content": prompt.text}));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "max_tokens": prompt.max_tokens,
            "temperature": prompt.temperature,
        });
        serde_json::to_vec(&body).expect("json body")
    }
}

fn parse_reply(body: &str) -> Result<ChatResponse, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))?
        .to_string();
    let usage = TokenUsage {
        prompt: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0) as u32,
        completion: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0) as u32,
    };
    let confidence = v.get("confidence").and_then(Value::as_f64).map(|c| c.clamp(0.0, 1.0));
    Ok(ChatResponse { text, confidence, token_usage: usage })
}

impl Backend for RemoteBackend {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<ChatResponse, LlmError> {
        let body = self.request_body(prompt);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let err = match self.transport.post(&self.config, &body) {
                Ok(reply) if (200..300).contains(&reply.status) => return parse_reply(&reply.body),
                Ok(reply) => LlmError::Http { status: reply.status, body: reply.body },
                Err(TransportError::Timeout) => LlmError::Timeout { attempts: attempt },
                Err(TransportError::Connect(m)) => LlmError::Unavailable(m),
            };
            if !err.is_retryable() || attempt > self.config.max_retries {
                return Err(err);
            }
            tracing::warn!(attempt, error = %err, "remote backend call failed, retrying");
        }
    }
}
