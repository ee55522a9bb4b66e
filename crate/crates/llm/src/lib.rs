//! Uniform access to language-model backends.
//!
//! Every agent talks to a model through [`Gateway::complete`]: the request
//! names a registered [`PromptTemplate`] plus its variable bindings, the
//! gateway renders the prompt and hands it to a [`Backend`]. Two backends
//! ship here: [`MockBackend`], which replays scripted fixtures so whole
//! pipelines run deterministically offline, and [`RemoteBackend`], which
//! speaks a JSON chat-completion wire format.

mod confidence;
mod error;
mod gateway;
mod mock;
mod remote;
mod template;

pub use confidence::{estimate_confidence, DEFAULT_CONFIDENCE};
pub use error::{LlmError, TemplateError};
pub use gateway::{Backend, ChatRequest, ChatResponse, Gateway, RenderedPrompt, Role, TokenUsage};
pub use mock::{prompt_hash, FixtureKey, MockBackend, MockEntry};
pub use remote::{HttpReply, HttpTransport, RemoteBackend, RemoteConfig, Transport, TransportError};
pub use template::{render_template, PromptTemplate, TemplateRegistry};
