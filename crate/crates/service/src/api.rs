//! REST endpoints. Chat and feedback replies stream as newline-delimited
//! JSON events; every other endpoint answers with one JSON document,
//! except artifact downloads which return the raw bytes.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use svw_core::{ArtifactKind, CoreError, SessionConfig};
use svw_engine::{patch_config, ApiMessage, EngineError, EventSink, Workbench};
use tokio_stream::wrappers::UnboundedReceiverStream;
use tokio_stream::StreamExt;

use crate::error::ServiceError;

/// Room for multipart framing on top of the file size limit.
const MULTIPART_SLACK: usize = 64 * 1024;

pub const NDJSON: &str = "application/x-ndjson";

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    workbench: Workbench,
    max_upload: usize,
    session_defaults: SessionConfig,
}

impl AppState {
    pub fn new(workbench: Workbench, max_upload: usize, session_defaults: SessionConfig) -> Self {
        Self { inner: Arc::new(Inner { workbench, max_upload, session_defaults }) }
    }

    pub fn workbench(&self) -> &Workbench {
        &self.inner.workbench
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Core(CoreError::NotFound { .. } | CoreError::InvalidId(_)) => StatusCode::NOT_FOUND,
            EngineError::Core(CoreError::Config(_)) | EngineError::EmptyQuery => StatusCode::BAD_REQUEST,
            EngineError::Input { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs a workbench call off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Workbench) -> Result<T, EngineError> + Send + 'static,
{
    let s = state.clone();
    tokio::task::spawn_blocking(move || f(s.workbench()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn require_session(state: &AppState, id: &str) -> ApiResult<()> {
    if state.workbench().store().exists(id) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::NOT_FOUND, format!("session {id} not found")))
    }
}

/// Streams the events of `f` as they are emitted. An error returned by `f`
/// becomes a final error event.
fn event_stream<F>(state: &AppState, session_id: String, f: F) -> Response
where
    F: FnOnce(&Workbench, &mut dyn EventSink) -> Result<(), EngineError> + Send + 'static,
{
    let (tx, rx) = tokio::sync::mpsc::unbounded_channel::<String>();
    let s = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut send = |m: ApiMessage| {
            let _ = tx.send(m.to_ndjson());
        };
        if let Err(e) = f(s.workbench(), &mut send) {
            tracing::warn!(session = %session_id, error = %e, "request failed");
            send(ApiMessage::Error {
                session_id: Some(session_id),
                message: e.to_string(),
                retryable: e.is_retryable(),
            });
        }
    });
    let body = Body::from_stream(UnboundedReceiverStream::new(rx).map(Ok::<_, Infallible>));
    ([(header::CONTENT_TYPE, NDJSON)], body).into_response()
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let patch: Value = if body.iter().all(u8::is_ascii_whitespace) { json!({}) } else { parse_body(&body)? };
    let config = patch_config(&state.inner.session_defaults, &patch).map_err(EngineError::from)?;
    let session = blocking(&state, move |wb| wb.create_session(config)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": session.session_id, "config": session.config })))
        .into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = blocking(&state, move |wb| wb.session(&id)).await?;
    Ok(Json(session).into_response())
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
    #[serde(default)]
    attachments: Vec<String>,
}

async fn post_message(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let msg: MessageBody = parse_body(&body)?;
    require_session(&state, &id)?;
    let sid = id.clone();
    Ok(event_stream(&state, id, move |wb, sink| wb.handle_message(&sid, &msg.text, &msg.attachments, sink).map(drop)))
}

#[derive(Deserialize)]
struct FeedbackBody {
    text: String,
}

async fn post_feedback(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let fb: FeedbackBody = parse_body(&body)?;
    require_session(&state, &id)?;
    let sid = id.clone();
    Ok(event_stream(&state, id, move |wb, sink| wb.feedback(&sid, &fb.text, sink).map(drop)))
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    ApiError::new(e.status(), e.body_text())
}

async fn upload(State(state): State<AppState>, Path(id): Path<String>, mut form: Multipart) -> ApiResult<Response> {
    require_session(&state, &id)?;
    let limit = state.inner.max_upload;
    let mut file: Option<(String, Bytes)> = None;
    let mut kind = None;
    while let Some(field) = form.next_field().await.map_err(multipart_error)? {
        if field.name() == Some("kind") {
            let text = field.text().await.map_err(multipart_error)?;
            kind = Some(ArtifactKind::from_str(&text).map_err(ApiError::bad_request)?);
        } else if let Some(name) = field.file_name().map(str::to_string) {
            let bytes = field.bytes().await.map_err(multipart_error)?;
            file = Some((name, bytes));
        }
    }
    let (filename, bytes) = file.ok_or_else(|| ApiError::bad_request("no file part in the upload"))?;
    if bytes.is_empty() {
        return Err(ApiError::bad_request(format!("{filename} is empty")));
    }
    if bytes.len() > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("{filename} is {} bytes; the limit is {limit}", bytes.len()),
        ));
    }
    let artifact = blocking(&state, move |wb| wb.upload(&filename, &bytes, kind)).await?;
    Ok((StatusCode::CREATED, Json(artifact)).into_response())
}

pub fn content_type(filename: &str) -> &'static str {
    let ext = filename.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase()).unwrap_or_default();
    match ext.as_str() {
        "json" => "application/json",
        "md" => "text/markdown; charset=utf-8",
        "sva" | "v" | "sv" | "vh" | "svh" | "txt" | "log" | "tsv" => "text/plain; charset=utf-8",
        "pdf" => "application/pdf",
        _ => "application/octet-stream",
    }
}

async fn get_artifact(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (artifact, bytes) = blocking(&state, move |wb| {
        let a = wb.store().artifact(&id)?;
        let b = wb.store().read_artifact(&id)?;
        Ok((a, b))
    })
    .await?;
    let disposition = format!("attachment; filename=\"{}\"", artifact.filename.replace('"', ""));
    Ok((
        [
            (header::CONTENT_TYPE, content_type(&artifact.filename).to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn get_config(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let config = blocking(&state, move |wb| wb.config(&id)).await?;
    Ok(Json(config).into_response())
}

async fn put_config(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let patch: Value = parse_body(&body)?;
    require_session(&state, &id)?;
    let config = blocking(&state, move |wb| wb.update_config(&id, &patch)).await?;
    Ok(Json(config).into_response())
}

pub fn router(state: AppState) -> Router {
    let limit = state.inner.max_upload.saturating_add(MULTIPART_SLACK);
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/feedback", post(post_feedback))
        .route("/api/sessions/{id}/files", post(upload))
        .route("/api/sessions/{id}/config", get(get_config).put(put_config))
        .route("/api/artifacts/{id}", get(get_artifact))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Config(format!("server error: {e}")))
}
