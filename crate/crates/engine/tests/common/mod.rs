#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use svw_agents::bugvalidate::MockSimulator;
use svw_agents::Resources;
use svw_core::{FixedClock, SessionStore};
use svw_engine::{ApiMessage, Workbench};
use svw_knowledge::{
    build_from_manifest, HashEmbedder, KnowledgeBase, MockWebSearch, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP,
};
use svw_llm::{Gateway, MockBackend};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixtures().join(rel)).unwrap()
}

/// A workbench over `data_dir` with every mock fixture, the sample
/// knowledge base and canned web results.
pub fn workbench(data_dir: &Path) -> (Workbench, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::from_dir(fixtures().join("mock")).unwrap());
    let gateway = Arc::new(Gateway::with_builtin_templates().with_backend("mock", mock.clone()));
    let embedder = HashEmbedder::default();
    let stores =
        build_from_manifest(&fixtures().join("knowledge/manifest.tsv"), &embedder, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP)
            .unwrap();
    let mut resources =
        Resources::bundled(Box::new(MockSimulator::new(fixtures().join("traces"))), data_dir.join("work"));
    resources.knowledge = Some(KnowledgeBase::new(stores, Box::new(embedder)));
    resources.web = Some(Box::new(MockWebSearch::new(fixtures().join("search"))));
    let store = SessionStore::open(data_dir).unwrap();
    (Workbench::new(store, gateway, resources, Arc::new(FixedClock::epoch())), mock)
}

pub fn kinds(events: &[ApiMessage]) -> Vec<&'static str> {
    events
        .iter()
        .map(|e| match e {
            ApiMessage::UserMessage { .. } => "user_message",
            ApiMessage::Answer { .. } => "answer",
            ApiMessage::NeedsInput { .. } => "needs_input",
            ApiMessage::StepProgress { .. } => "step_progress",
            ApiMessage::ArtifactReady { .. } => "artifact_ready",
            ApiMessage::Error { .. } => "error",
        })
        .collect()
}

/// Routing suite rows: expected class, attachment kinds, query.
pub fn routing_rows() -> Vec<(String, Vec<String>, String)> {
    let text = std::fs::read_to_string(fixtures().join("routing/queries.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.splitn(3, '\t').collect();
            let atts = if cols[1] == "-" { vec![] } else { cols[1].split(',').map(str::to_string).collect() };
            (cols[0].to_string(), atts, cols[2].to_string())
        })
        .collect()
}
