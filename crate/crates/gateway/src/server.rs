//! HTTP routes: sessions, uploads, messages with a server-sent event stream
//! of plan progress, and file retrieval.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use geoagent_core::model::{mime_for_extension, FileRegistry, Session, MIME_JSON};
use geoagent_core::planner::{Planner, StreamEvent};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::watch;

pub const PALETTE_ROUTE_SUFFIX: &str = ".palette.json";
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

/// Events of one message, appended while its plan runs.
struct MessageLog {
    events: Mutex<Vec<StreamEvent>>,
    len: watch::Sender<usize>,
}

impl MessageLog {
    fn new() -> Self {
        Self {
            events: Mutex::new(Vec::new()),
            len: watch::channel(0).0,
        }
    }

    fn push(&self, e: StreamEvent) {
        let n = {
            let mut v = self.events.lock().unwrap();
            v.push(e);
            v.len()
        };
        self.len.send_replace(n);
    }

    fn get(&self, i: usize) -> Option<StreamEvent> {
        self.events.lock().unwrap().get(i).cloned()
    }
}

struct SessionSlot {
    session: Arc<tokio::sync::Mutex<Session>>,
    // shares storage with the session's own registry, so files can be
    // served while a plan holds the session lock
    files: FileRegistry,
    messages: Mutex<HashMap<String, Arc<MessageLog>>>,
}

pub struct AppState {
    planner: Planner,
    store_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    pub fn new(planner: Planner, store_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            planner,
            store_dir,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "a message is still being processed in this session")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message}))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/tools", get(list_tools))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(session_info))
        .route("/api/sessions/{id}/files", post(upload))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/events", get(events))
        .route("/api/files/{session}/{name}", get(get_file))
        .layer(axum::extract::DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn list_tools(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(state.planner.registry().tools().to_vec())
}

#[derive(Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<Json<SessionCreated>, ApiError> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = match &state.store_dir {
        Some(root) => Session::with_store(id.clone(), root)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?,
        None => Session::new(id.clone()),
    };
    let slot = SessionSlot {
        files: session.files.clone(),
        session: Arc::new(tokio::sync::Mutex::new(session)),
        messages: Mutex::new(HashMap::new()),
    };
    state.sessions.write().unwrap().insert(id.clone(), Arc::new(slot));
    tracing::info!(session = %id, "session created");
    Ok(Json(SessionCreated { session_id: id }))
}

async fn session_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let slot = state.slot(&id)?;
    let session = slot.session.try_lock().map_err(|_| ApiError::busy())?;
    Ok(Json(json!({
        "session_id": id,
        "files": session.files.files(),
        "visual_cues": session.visual_cues,
        "history": session.history,
    })))
}

#[derive(Serialize, Deserialize)]
pub struct Uploaded {
    pub file_name: String,
    pub caption: String,
}

async fn upload(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> Result<Json<Uploaded>, ApiError> {
    let slot = state.slot(&id)?;
    let mut session = slot.session.clone().try_lock_owned().map_err(|_| ApiError::busy())?;
    let field = loop {
        match multipart.next_field().await {
            Ok(Some(f)) if f.file_name().is_some() => break f,
            Ok(Some(_)) => continue,
            Ok(None) => return Err(ApiError::bad_request("multipart body has no file part")),
            Err(e) => return Err(ApiError::bad_request(e.body_text())),
        }
    };
    let original = field.file_name().unwrap_or("image").to_string();
    let by_ext = std::path::Path::new(&original)
        .extension()
        .and_then(|e| e.to_str())
        .and_then(|e| mime_for_extension(&e.to_ascii_lowercase()));
    let mime = field
        .content_type()
        .filter(|m| m.starts_with("image/"))
        .map(str::to_string)
        .or(by_ext.map(str::to_string))
        .ok_or_else(|| ApiError::bad_request("upload must be a PNG or JPEG image"))?;
    let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let (file, caption) = state
        .planner
        .ingest_image(&mut session, &original, &mime, bytes.to_vec())
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(Uploaded {
        file_name: file.name,
        caption,
    }))
}

#[derive(Deserialize)]
pub struct MessageBody {
    pub text: String,
}

#[derive(Serialize, Deserialize)]
pub struct MessageAccepted {
    pub message_id: String,
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<MessageBody>, JsonRejection>,
) -> Result<Json<MessageAccepted>, ApiError> {
    let slot = state.slot(&id)?;
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let text = body.text.trim().to_string();
    if text.is_empty() {
        return Err(ApiError::bad_request("`text` is empty"));
    }
    let mut session = slot.session.clone().try_lock_owned().map_err(|_| ApiError::busy())?;
    let message_id = uuid::Uuid::new_v4().simple().to_string();
    let log = Arc::new(MessageLog::new());
    slot.messages.lock().unwrap().insert(message_id.clone(), log.clone());
    let planner = state.planner.clone();
    let (sid, mid) = (id.clone(), message_id.clone());
    tokio::spawn(async move {
        let sink = {
            let log = log.clone();
            move |e: StreamEvent| log.push(e)
        };
        let trace = planner.run_plan(&mut session, &text, &sink).await;
        tracing::info!(
            session = %sid,
            message = %mid,
            steps = trace.steps.len(),
            llm_calls = trace.llm_calls,
            "plan finished"
        );
        // the session lock is released only after the terminal event is logged
        drop(session);
    });
    Ok(Json(MessageAccepted { message_id }))
}

#[derive(Deserialize)]
pub struct EventsQuery {
    pub message_id: String,
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<EventsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = state.slot(&id)?;
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let log = slot
        .messages
        .lock()
        .unwrap()
        .get(&q.message_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no message `{}`", q.message_id)))?;
    Ok(Sse::new(event_stream(log)).keep_alive(KeepAlive::default()))
}

/// Replays the log from the start and follows it until the terminal event.
fn event_stream(log: Arc<MessageLog>) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = log.len.subscribe();
    stream::unfold((log, rx, 0usize, false), |(log, mut rx, next, done)| async move {
        if done {
            return None;
        }
        loop {
            if let Some(e) = log.get(next) {
                let terminal = e.is_terminal();
                let sse = Event::default()
                    .event(e.kind())
                    .json_data(&e)
                    .expect("events serialize");
                return Some((Ok(sse), (log, rx, next + 1, terminal)));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

async fn get_file(
    State(state): State<Arc<AppState>>,
    Path((session, name)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let slot = state.slot(&session)?;
    if let Some(mask) = name.strip_suffix(PALETTE_ROUTE_SUFFIX) {
        let palette = slot
            .files
            .palette(mask)
            .ok()
            .flatten()
            .ok_or_else(|| ApiError::not_found(format!("no palette for `{mask}`")))?;
        return Ok(([(header::CONTENT_TYPE, MIME_JSON)], Json(palette)).into_response());
    }
    let file = slot
        .files
        .resolve_file(&name)
        .map_err(|_| ApiError::not_found(format!("no file `{name}` in session `{session}`")))?;
    let bytes = slot.files.bytes(&name).map_err(|e| ApiError::not_found(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, file.mime)], bytes.as_ref().clone()).into_response())
}
