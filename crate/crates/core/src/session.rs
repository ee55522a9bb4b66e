use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use svw_llm::{ChatRequest, Gateway};

use crate::error::CoreError;
use crate::ids::new_id;
use crate::types::{ArtifactRef, Author, SessionConfig, TaskContext, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub config: SessionConfig,
    pub created_at: DateTime<Utc>,
    /// Long-term memory. Append-only.
    pub transcript: Vec<Turn>,
    /// Short-term memory for the current task.
    pub short_term: TaskContext,
}

pub fn create_session(config: SessionConfig, now: DateTime<Utc>) -> Result<Session, CoreError> {
    config.validate()?;
    Ok(Session {
        session_id: new_id(),
        config,
        created_at: now,
        transcript: Vec::new(),
        short_term: TaskContext::default(),
    })
}

impl Session {
    pub fn append_turn(&mut self, turn: Turn) -> Result<&Turn, CoreError> {
        if turn.index != self.transcript.len() {
            return Err(CoreError::Sequence { expected: self.transcript.len(), got: turn.index });
        }
        self.transcript.push(turn);
        Ok(self.transcript.last().unwrap())
    }

    /// Builds the next turn with the correct index.
    pub fn next_turn(
        &self,
        author: Author,
        content: impl Into<String>,
        attachments: Vec<ArtifactRef>,
        now: DateTime<Utc>,
    ) -> Turn {
        Turn { index: self.transcript.len(), author, content: content.into(), attachments, timestamp: now }
    }

    /// Last turn written by an agent (or the system), if any.
    pub fn last_answer(&self) -> Option<&Turn> {
        self.transcript.iter().rev().find(|t| t.author != Author::User)
    }
}

/// One JSON record per line.
pub fn transcript_ndjson(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(&serde_json::to_string(t).expect("turn serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FollowUp {
    Fresh,
    FollowUp { anchor_turn_index: usize },
}

const TURN_PREVIEW_CHARS: usize = 400;

fn transcript_preview(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        let mut text: String = t.content.chars().take(TURN_PREVIEW_CHARS).collect();
        if t.content.chars().count() > TURN_PREVIEW_CHARS {
            text.push_str(" ...");
        }
        out.push_str(&format!("{} [{}]: {}\n", t.index, t.author, text.replace('\n', " ")));
    }
    out
}

/// Parses the dialogue-state tracker reply. Anything other than a valid
/// in-range "follow-up of turn N" is treated as fresh.
pub fn parse_follow_up(reply: &str, transcript_len: usize) -> FollowUp {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)follow[\s_-]*up\s+of\s+turn\s+#?(\d+)").unwrap());
    match re.captures(reply).and_then(|c| c[1].parse::<usize>().ok()) {
        Some(i) if i < transcript_len => FollowUp::FollowUp { anchor_turn_index: i },
        Some(i) => {
            tracing::warn!(i, transcript_len, "follow-up anchor out of range; treating as fresh");
            FollowUp::Fresh
        }
        None => FollowUp::Fresh,
    }
}

/// Asks the session's backend whether `query` continues an earlier turn.
/// An empty transcript is always fresh and makes no backend call.
pub fn resolve_follow_up(session: &Session, query: &str, gateway: &Gateway) -> Result<FollowUp, CoreError> {
    if session.transcript.is_empty() {
        return Ok(FollowUp::Fresh);
    }
    let req = ChatRequest::new("follow_up")
        .var("transcript", transcript_preview(&session.transcript))
        .var("query", query)
        .max_tokens(32);
    let reply = gateway.complete(&session.config.backend_id, &req)?;
    Ok(parse_follow_up(&reply.text, session.transcript.len()))
}
