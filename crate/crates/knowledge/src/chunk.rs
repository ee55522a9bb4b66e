use serde::{Deserialize, Serialize};

use crate::error::KnowledgeError;

pub const DEFAULT_CHUNK_SIZE: usize = 256;
pub const DEFAULT_OVERLAP: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub chunk_id: String,
    pub source_doc: String,
    pub ordinal: usize,
    /// Tokens with their trailing whitespace; the first chunk of a document
    /// also carries any leading whitespace.
    pub text: String,
    pub token_estimate: usize,
}

/// Splits into whitespace-delimited tokens, each keeping the whitespace that
/// follows it. Leading whitespace is glued to the first token.
fn segments(doc: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut seen_token = false;
    let mut in_ws = false;
    for (idx, c) in doc.char_indices() {
        let ws = c.is_whitespace();
        if !ws && in_ws && seen_token {
            out.push(&doc[start..idx]);
            start = idx;
        }
        seen_token |= !ws;
        in_ws = ws;
    }
    if seen_token {
        out.push(&doc[start..]);
    }
    out
}

pub fn chunk_id(source_id: &str, ordinal: usize) -> String {
    format!("{source_id}#{ordinal:06}")
}

/// Greedy fixed-size chunking: chunks start every `chunk_size - overlap`
/// tokens until every token has been the start of or inside a chunk.
pub fn ingest(
    doc: &str,
    source_id: &str,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<KnowledgeChunk>, KnowledgeError> {
    if chunk_size == 0 {
        return Err(KnowledgeError::Parameter("chunk_size must be positive".into()));
    }
    if overlap >= chunk_size {
        return Err(KnowledgeError::Parameter(format!(
            "overlap {overlap} must be smaller than chunk_size {chunk_size}"
        )));
    }
    let segs = segments(doc);
    let step = chunk_size - overlap;
    Ok((0..segs.len())
        .step_by(step)
        .enumerate()
        .map(|(ordinal, start)| {
            let end = (start + chunk_size).min(segs.len());
            KnowledgeChunk {
                chunk_id: chunk_id(source_id, ordinal),
                source_doc: source_id.to_string(),
                ordinal,
                text: segs[start..end].concat(),
                token_estimate: end - start,
            }
        })
        .collect())
}

/// Inverse of [`ingest`] for one document's chunks in ordinal order.
pub fn reconstruct(chunks: &[KnowledgeChunk], overlap: usize) -> String {
    let mut out = String::new();
    for (i, c) in chunks.iter().enumerate() {
        let segs = segments(&c.text);
        let skip = if i == 0 { 0 } else { overlap.min(segs.len()) };
        out.extend(segs[skip..].iter().copied());
    }
    out
}
