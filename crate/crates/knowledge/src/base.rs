use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chunk::ingest;
use crate::embed::Embedder;
use crate::error::KnowledgeError;
use crate::store::{route_domain, VectorStore};

/// Hits scoring below this are dropped from retrieval results.
pub const SCORE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
}

/// `path<TAB>label` per line; `#` comments and blank lines are skipped.
/// Relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, KnowledgeError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((path, label)) = line.split_once('\t') else {
            return Err(KnowledgeError::Parameter(format!("manifest line {}: expected path<TAB>label", n + 1)));
        };
        let (path, label) = (path.trim(), label.trim());
        if path.is_empty() || label.is_empty() {
            return Err(KnowledgeError::Parameter(format!("manifest line {}: empty path or label", n + 1)));
        }
        out.push(ManifestEntry { path: base.join(path), label: label.to_string() });
    }
    Ok(out)
}

/// Store ids are the label lowercased with non-alphanumerics collapsed to `_`.
pub fn store_id_for(label: &str) -> String {
    let mut out = String::new();
    for w in label.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&w.to_ascii_lowercase());
    }
    out
}

/// One store per distinct label, in first-appearance order.
pub fn build_from_manifest(
    manifest: &Path,
    embedder: &dyn Embedder,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<VectorStore>, KnowledgeError> {
    let text = fs::read_to_string(manifest).map_err(|e| KnowledgeError::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut stores: Vec<VectorStore> = Vec::new();
    for entry in parse_manifest(&text, base)? {
        let doc = fs::read_to_string(&entry.path).map_err(|e| KnowledgeError::io(&entry.path, e))?;
        let source = entry
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.path.display().to_string());
        let id = store_id_for(&entry.label);
        let idx = match stores.iter().position(|s| s.store_id == id) {
            Some(i) => i,
            None => {
                stores.push(VectorStore::new(&id, &entry.label, embedder.dims(), embedder.name()));
                stores.len() - 1
            }
        };
        for c in ingest(&doc, &source, chunk_size, overlap)? {
            let v = embedder.embed(&c.text);
            stores[idx].insert(c, v)?;
        }
    }
    Ok(stores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub store_id: String,
    pub chunk_id: String,
    pub source_doc: String,
    pub text: String,
    pub score: f64,
}

/// All stores under one directory.
pub struct KnowledgeBase {
    stores: Vec<VectorStore>,
    embedder: Box<dyn Embedder>,
}

impl KnowledgeBase {
    pub fn new(stores: Vec<VectorStore>, embedder: Box<dyn Embedder>) -> Self {
        let mut stores = stores;
        stores.sort_by(|a, b| a.store_id.cmp(&b.store_id));
        Self { stores, embedder }
    }

    /// Loads every subdirectory containing `meta.json`. A missing directory
    /// gives an empty base.
    pub fn load_dir(dir: &Path, embedder: Box<dyn Embedder>) -> Result<Self, KnowledgeError> {
        let mut stores = Vec::new();
        if dir.is_dir() {
            for e in fs::read_dir(dir).map_err(|e| KnowledgeError::io(dir, e))? {
                let p = e.map_err(|e| KnowledgeError::io(dir, e))?.path();
                let hidden = p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
                if !hidden && p.join("meta.json").is_file() {
                    let s = VectorStore::load(&p)?;
                    if s.dims() != embedder.dims() {
                        return Err(KnowledgeError::DimensionMismatch { expected: embedder.dims(), got: s.dims() });
                    }
                    stores.push(s);
                }
            }
        }
        Ok(Self::new(stores, embedder))
    }

    pub fn stores(&self) -> &[VectorStore] {
        &self.stores
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn route(&self, query: &str) -> Result<&VectorStore, KnowledgeError> {
        route_domain(query, &self.stores, self.embedder.as_ref())
    }

    /// Routes to one store, then returns its top-k above the score floor.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RetrievedChunk>, KnowledgeError> {
        let store = self.route(query)?;
        let q = self.embedder.embed(query);
        Ok(store
            .search(&q, k)?
            .into_iter()
            .filter(|h| h.score >= SCORE_FLOOR)
            .filter_map(|h| {
                store.chunk(&h.chunk_id).map(|c| RetrievedChunk {
                    store_id: store.store_id.clone(),
                    chunk_id: h.chunk_id,
                    source_doc: c.source_doc.clone(),
                    text: c.text.clone(),
                    score: h.score,
                })
            })
            .collect())
    }
}
