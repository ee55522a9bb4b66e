//! Records streamed to clients, one JSON object per line.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use svw_core::{AgentKind, ArtifactRef, Requirement, StepState};

/// Progress of one plan step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "step")]
pub struct StepProgress {
    pub plan_id: String,
    pub step: String,
    pub status: String,
}

impl StepProgress {
    pub fn new(plan_id: &str, step: &str, state: &StepState) -> Self {
        Self { plan_id: plan_id.into(), step: step.into(), status: state.label().into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ApiMessage {
    UserMessage {
        session_id: String,
        turn_index: usize,
        content: String,
        #[serde(default)]
        attachments: Vec<ArtifactRef>,
    },
    Answer {
        session_id: String,
        turn_index: usize,
        agent: Option<AgentKind>,
        text: String,
        #[serde(default)]
        citations: Vec<Value>,
        #[serde(default)]
        artifacts: Vec<ArtifactRef>,
        /// Further categories the request touched, offered as next tasks.
        #[serde(default)]
        follow_ups: Vec<AgentKind>,
    },
    NeedsInput {
        session_id: String,
        plan_id: Option<String>,
        requirements: Vec<Requirement>,
    },
    StepProgress {
        session_id: String,
        progress: StepProgress,
    },
    ArtifactReady {
        session_id: String,
        artifact: ArtifactRef,
    },
    Error {
        session_id: Option<String>,
        message: String,
        retryable: bool,
    },
}

impl ApiMessage {
    pub fn to_ndjson(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialize");
        s.push('\n');
        s
    }
}

/// Receives messages as a request is handled.
pub trait EventSink {
    fn emit(&mut self, message: ApiMessage);
}

impl EventSink for Vec<ApiMessage> {
    fn emit(&mut self, message: ApiMessage) {
        self.push(message);
    }
}

impl<F: FnMut(ApiMessage)> EventSink for F {
    fn emit(&mut self, message: ApiMessage) {
        self(message)
    }
}
