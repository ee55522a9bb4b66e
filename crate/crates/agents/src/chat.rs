//! Security verification chat: intent, query rewriting, dual retrieval and
//! grounded answer generation.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use svw_knowledge::{KnowledgeBase, KnowledgeError, WebResult, WebSearch};
use svw_llm::ChatRequest;

use crate::env::AgentEnv;
use crate::error::AgentError;
use crate::text::{labeled, list};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatIntent {
    SecurityQuestion,
    Feedback,
    Invalid,
}

/// Classifies a chat message. Feedback is only possible when there is a
/// previous answer to give feedback on.
pub fn resolve_chat_intent(env: &AgentEnv, query: &str, last_answer: Option<&str>) -> Result<ChatIntent, AgentError> {
    let reply = env.complete(
        &ChatRequest::new("chat_intent")
            .var("query", query)
            .var("last_answer", last_answer.unwrap_or(""))
            .max_tokens(16),
    )?;
    let raw = labeled(&reply.text, "intent").unwrap_or(reply.text.trim()).to_ascii_lowercase();
    let intent = if raw.contains("feedback") {
        ChatIntent::Feedback
    } else if raw.contains("security") || raw.contains("question") {
        ChatIntent::SecurityQuestion
    } else {
        ChatIntent::Invalid
    };
    Ok(match intent {
        ChatIntent::Feedback if last_answer.is_none() => ChatIntent::SecurityQuestion,
        i => i,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizedQuery {
    pub original: String,
    pub optimized: String,
    pub expansions: Vec<String>,
}

impl OptimizedQuery {
    /// Text used for retrieval: the rewrite plus its expansions.
    pub fn retrieval_text(&self) -> String {
        let mut s = self.optimized.clone();
        for e in &self.expansions {
            s.push(' ');
            s.push_str(e);
        }
        s
    }
}

pub fn optimize_query(env: &AgentEnv, query: &str, dialogue_state: &str) -> Result<OptimizedQuery, AgentError> {
    let reply = env.complete(
        &ChatRequest::new("query_optimize")
            .var("query", query)
            .var("dialogue_state", if dialogue_state.trim().is_empty() { "(none)" } else { dialogue_state })
            .max_tokens(128),
    )?;
    let optimized = labeled(&reply.text, "optimized").filter(|s| !s.is_empty()).unwrap_or(query).to_string();
    let expansions = labeled(&reply.text, "expansions").map(|v| list(v, ';')).unwrap_or_default();
    Ok(OptimizedQuery { original: query.to_string(), optimized, expansions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    /// Chunk id for store evidence, URL for web evidence.
    pub source: String,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub answer: String,
    pub citations: Vec<Citation>,
    pub used_web: bool,
    /// Store consulted for this answer, if any.
    pub store_id: Option<String>,
    /// True when no evidence was found and nothing was generated.
    pub insufficient_knowledge: bool,
}

pub const INSUFFICIENT_KNOWLEDGE: &str =
    "The knowledge base has insufficient information to answer this question, and no web results were available.";

const QUOTE_CHARS: usize = 160;

struct Evidence {
    id: String,
    source: String,
    body: String,
}

fn quote(text: &str) -> String {
    let t: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match t.char_indices().nth(QUOTE_CHARS) {
        Some((i, _)) => format!("{}...", &t[..i]),
        None => t,
    }
}

fn gather_evidence(
    env: &AgentEnv,
    kb: Option<&KnowledgeBase>,
    web: Option<&dyn WebSearch>,
    retrieval_query: &str,
    web_query: &str,
) -> Result<(Vec<Evidence>, Option<String>, bool), AgentError> {
    let mut evidence = Vec::new();
    let mut store_id = None;
    if let Some(kb) = kb.filter(|kb| !kb.is_empty()) {
        let hits = kb.retrieve(retrieval_query, env.retrieval_k.max(1))?;
        if let Some(h) = hits.first() {
            store_id = Some(h.store_id.clone());
        }
        for h in hits {
            evidence.push(Evidence { id: h.chunk_id.clone(), source: h.chunk_id, body: h.text });
        }
    }
    let mut used_web = false;
    if let Some(web) = web {
        match web.search(web_query) {
            Ok(results) => {
                for (i, WebResult { title, url, snippet }) in results.into_iter().enumerate() {
                    used_web = true;
                    evidence.push(Evidence {
                        id: format!("web:{}", i + 1),
                        source: url.clone(),
                        body: format!("{title} ({url}): {snippet}"),
                    });
                }
            }
            Err(KnowledgeError::SearchUnavailable) => {
                tracing::debug!("web search unavailable; answering from stores only");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((evidence, store_id, used_web))
}

fn evidence_block(evidence: &[Evidence]) -> String {
    let mut s = String::new();
    for e in evidence {
        let origin = if e.id.starts_with("web:") { "web" } else { "knowledge base" };
        s.push_str(&format!("[{}] ({origin}) {}\n", e.id, e.body.trim()));
    }
    s
}

/// Citations for the bracketed ids the reply mentions; all evidence when
/// it mentions none.
fn citations(reply: &str, evidence: &[Evidence]) -> Vec<Citation> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\[([^\[\]\s]+)\]").unwrap());
    let mentioned: BTreeSet<&str> = re.captures_iter(reply).map(|c| c.get(1).unwrap().as_str()).collect();
    let picked: Vec<&Evidence> = evidence.iter().filter(|e| mentioned.contains(e.id.as_str())).collect();
    let picked = if picked.is_empty() { evidence.iter().collect() } else { picked };
    picked.into_iter().map(|e| Citation { source: e.source.clone(), quote: quote(&e.body) }).collect()
}

fn insufficient() -> GroundedAnswer {
    GroundedAnswer {
        answer: INSUFFICIENT_KNOWLEDGE.into(),
        citations: Vec::new(),
        used_web: false,
        store_id: None,
        insufficient_knowledge: true,
    }
}

/// Retrieves evidence for `query` and generates an answer grounded only in it.
pub fn answer(
    env: &AgentEnv,
    kb: Option<&KnowledgeBase>,
    web: Option<&dyn WebSearch>,
    query: &OptimizedQuery,
) -> Result<GroundedAnswer, AgentError> {
    let (evidence, store_id, used_web) = gather_evidence(env, kb, web, &query.retrieval_text(), &query.optimized)?;
    if evidence.is_empty() {
        return Ok(insufficient());
    }
    let reply = env.complete(
        &ChatRequest::new("chat_answer")
            .var("query", &query.optimized)
            .var("evidence", evidence_block(&evidence))
            .max_tokens(1024),
    )?;
    Ok(GroundedAnswer {
        citations: citations(&reply.text, &evidence),
        answer: reply.text.trim().to_string(),
        used_web,
        store_id,
        insufficient_knowledge: false,
    })
}

/// Regenerates a previous answer taking the engineer's feedback into account.
pub fn answer_feedback(
    env: &AgentEnv,
    kb: Option<&KnowledgeBase>,
    web: Option<&dyn WebSearch>,
    original_query: &str,
    previous_answer: &str,
    feedback: &str,
) -> Result<GroundedAnswer, AgentError> {
    let retrieval = format!("{original_query} {feedback}");
    let (evidence, store_id, used_web) = gather_evidence(env, kb, web, &retrieval, original_query)?;
    let reply = env.complete(
        &ChatRequest::new("chat_feedback")
            .var("query", original_query)
            .var("previous_answer", previous_answer)
            .var("feedback", feedback)
            .var("evidence", if evidence.is_empty() { "(none)".to_string() } else { evidence_block(&evidence) })
            .max_tokens(1024),
    )?;
    Ok(GroundedAnswer {
        citations: citations(&reply.text, &evidence),
        answer: reply.text.trim().to_string(),
        used_web,
        store_id,
        insufficient_knowledge: false,
    })
}

pub const INVALID_CHAT_REPLY: &str = "I can only help with hardware security and verification questions. \
Please rephrase your request in that scope.";
