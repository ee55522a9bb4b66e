use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::KnowledgeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

pub trait WebSearch: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<WebResult>, KnowledgeError>;
}

/// `"Hardware Fuzzing!"` becomes `hardware-fuzzing`.
pub fn query_slug(query: &str) -> String {
    let mut out = String::new();
    for w in query.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push('-');
        }
        out.push_str(&w.to_lowercase());
    }
    out
}

fn check_query(query: &str) -> Result<(), KnowledgeError> {
    if query.trim().is_empty() {
        return Err(KnowledgeError::Parameter("empty search query".into()));
    }
    Ok(())
}

/// Used when no search provider is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnconfiguredSearch;

impl WebSearch for UnconfiguredSearch {
    fn search(&self, query: &str) -> Result<Vec<WebResult>, KnowledgeError> {
        check_query(query)?;
        Err(KnowledgeError::SearchUnavailable)
    }
}

/// Reads `<dir>/<slug>.tsv` with `title<TAB>url<TAB>snippet` rows. A query
/// without a fixture returns no results.
#[derive(Debug, Clone)]
pub struct MockWebSearch {
    dir: PathBuf,
}

impl MockWebSearch {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl WebSearch for MockWebSearch {
    fn search(&self, query: &str) -> Result<Vec<WebResult>, KnowledgeError> {
        check_query(query)?;
        let path = self.dir.join(format!("{}.tsv", query_slug(query)));
        if !path.is_file() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(|e| KnowledgeError::io(&path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut cols = l.splitn(3, '\t');
                match (cols.next(), cols.next(), cols.next()) {
                    (Some(t), Some(u), Some(s)) => Ok(WebResult {
                        title: t.trim().to_string(),
                        url: u.trim().to_string(),
                        snippet: s.trim().to_string(),
                    }),
                    _ => Err(KnowledgeError::corrupt(&path, format!("expected 3 columns: {l:?}"))),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(query_slug("Hardware  Fuzzing!"), "hardware-fuzzing");
        assert_eq!(query_slug("  "), "");
    }

    #[test]
    fn unconfigured_and_empty() {
        assert!(matches!(UnconfiguredSearch.search("x"), Err(KnowledgeError::SearchUnavailable)));
        assert!(matches!(UnconfiguredSearch.search(" "), Err(KnowledgeError::Parameter(_))));
        let m = MockWebSearch::new("/nonexistent");
        assert!(matches!(m.search(""), Err(KnowledgeError::Parameter(_))));
        assert!(m.search("anything").unwrap().is_empty());
    }
}
