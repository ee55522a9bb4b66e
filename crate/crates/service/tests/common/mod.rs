#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use svw_core::FixedClock;
use svw_knowledge::{build_from_manifest, HashEmbedder, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use svw_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixtures().join(rel)).unwrap()
}

/// Mock backend, traces and search results from the fixture tree, and the
/// sample knowledge stores built into the data directory.
pub fn service_config(data_dir: &Path) -> ServiceConfig {
    let cfg = ServiceConfig {
        mock_fixtures: Some(fixtures().join("mock")),
        mock_traces: Some(fixtures().join("traces")),
        search_fixtures: Some(fixtures().join("search")),
        ..ServiceConfig::new(data_dir)
    };
    if !cfg.stores_dir().exists() {
        let stores = build_from_manifest(
            &fixtures().join("knowledge/manifest.tsv"),
            &HashEmbedder::default(),
            DEFAULT_CHUNK_SIZE,
            DEFAULT_OVERLAP,
        )
        .unwrap();
        for s in stores {
            s.save(&cfg.stores_dir()).unwrap();
        }
    }
    cfg
}

/// A fresh service over `cfg`, as after a process start.
pub fn app(cfg: &ServiceConfig) -> Router {
    let wb = cfg.build_with_clock(Arc::new(FixedClock::epoch())).unwrap();
    router(AppState::new(wb, cfg.max_upload, cfg.session_defaults()))
}

pub async fn call(app: &Router, req: Request<Body>) -> (StatusCode, HeaderMap, Bytes) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes();
    (status, headers, body)
}

pub async fn json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let (status, _, bytes) = call(app, req).await;
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

pub async fn new_session(app: &Router) -> String {
    let (status, v) = json(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// Posts to a streaming endpoint and parses every NDJSON line.
pub async fn stream(app: &Router, uri: &str, body: Value) -> (StatusCode, Vec<Value>) {
    let req = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, headers, bytes) = call(app, req).await;
    if status != StatusCode::OK {
        return (status, vec![]);
    }
    assert_eq!(headers[header::CONTENT_TYPE], "application/x-ndjson");
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    assert!(text.is_empty() || text.ends_with('\n'));
    (status, text.lines().map(|l| serde_json::from_str(l).unwrap()).collect())
}

pub async fn message(app: &Router, sid: &str, text: &str, attachments: &[&str]) -> Vec<Value> {
    let (status, ev) = stream(
        app,
        &format!("/api/sessions/{sid}/messages"),
        serde_json::json!({"text": text, "attachments": attachments}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    ev
}

pub fn types(events: &[Value]) -> Vec<&str> {
    events.iter().map(|e| e["type"].as_str().unwrap()).collect()
}

pub fn multipart(filename: &str, bytes: &[u8], kind: Option<&str>) -> (String, Vec<u8>) {
    let boundary = "svwboundary7d1e";
    let mut body = Vec::new();
    if let Some(k) = kind {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"kind\"\r\n\r\n{k}\r\n").as_bytes(),
        );
    }
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

pub async fn upload(app: &Router, sid: &str, filename: &str, bytes: &[u8], kind: Option<&str>) -> (StatusCode, Value) {
    let (ct, body) = multipart(filename, bytes, kind);
    let req = Request::builder()
        .method(Method::POST)
        .uri(format!("/api/sessions/{sid}/files"))
        .header(header::CONTENT_TYPE, ct)
        .body(Body::from(body))
        .unwrap();
    let (status, _, bytes) = call(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub async fn download(app: &Router, artifact_id: &str) -> (StatusCode, HeaderMap, Bytes) {
    let req = Request::builder().uri(format!("/api/artifacts/{artifact_id}")).body(Body::empty()).unwrap();
    call(app, req).await
}
