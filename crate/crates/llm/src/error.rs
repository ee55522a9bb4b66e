use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template `{template_id}` is missing variable `{name}`")]
    MissingVariable { template_id: String, name: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("malformed template `{template_id}` at byte {offset}: {message}")]
    Malformed { template_id: String, offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no mock fixture for template `{template_id}` (prompt-hash {hash})")]
    FixtureMissing { template_id: String, hash: String },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend reply: {0}")]
    Malformed(String),
}

impl LlmError {
    /// Whether re-sending the identical request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Timeout { .. } | LlmError::Unavailable(_) => true,
            LlmError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}
