//! Knowledge side of the workbench: chunking, a reference embedder, exact
//! top-k vector stores with domain routing, and a web-search adapter.

mod base;
mod chunk;
mod embed;
mod error;
mod store;
mod web;

pub use base::{
    build_from_manifest, parse_manifest, store_id_for, KnowledgeBase, ManifestEntry, RetrievedChunk, SCORE_FLOOR,
};
pub use chunk::{chunk_id, ingest, reconstruct, KnowledgeChunk, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
pub use embed::{words, Embedder, EmbeddingVector, HashEmbedder, REFERENCE_DIMS};
pub use error::KnowledgeError;
pub use store::{route_domain, SearchHit, StoreMeta, VectorStore};
pub use web::{query_slug, MockWebSearch, UnconfiguredSearch, WebResult, WebSearch};
