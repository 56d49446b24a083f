//! Session service for the instructor interface.
//!
//! HTTP routes:
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/session` | create, body [`NewSession`] (may be empty) |
//! | GET | `/session/{id}/snapshot/{kind}` | scene, stack, semantic, episodic or transcript |
//! | POST | `/session/{id}/save` | returns a [`SessionSave`] |
//! | POST | `/session/{id}/load` | replaces agent and scene from a [`SessionSave`] |
//! | DELETE | `/session/{id}` | close |
//! | GET | `/session/{id}/ws?since=N` | message channel, see [`message`] |
//!
//! The wire format is documented in `docs/protocol.md`.

pub mod message;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;

pub use message::{Body, Envelope, ErrorCode, PROTOCOL_VERSION};
pub use session::{NewSession, SessionError, SessionHandle, SessionSave, SnapshotKind, Snapshots};

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
    next: Arc<AtomicU64>,
}

impl AppState {
    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session table").get(id).cloned()
    }

    pub fn create(&self, new: NewSession) -> Result<(String, SessionHandle), SessionError> {
        let handle = SessionHandle::spawn(new)?;
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        self.sessions.lock().expect("session table").insert(id.clone(), handle.clone());
        Ok((id, handle))
    }
}

/// HTTP-facing error.
#[derive(Debug)]
pub enum ApiError {
    NoSession(String),
    Session(SessionError),
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::NoSession(id) => (StatusCode::NOT_FOUND, "no_session", format!("no session {id}")),
            ApiError::Session(e) => {
                let (status, code) = match e {
                    SessionError::SessionClosed => (StatusCode::GONE, "session_closed"),
                    SessionError::UnknownObject(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_object"),
                    SessionError::Version(_) => (StatusCode::BAD_REQUEST, "version"),
                    SessionError::Scene(_) | SessionError::Agent(_) => (StatusCode::BAD_REQUEST, "bad_request"),
                };
                (status, code, e.to_string())
            }
        };
        (status, Json(serde_json::json!({ "error": code, "message": message }))).into_response()
    }
}

fn lookup(state: &AppState, id: &str) -> Result<SessionHandle, ApiError> {
    state.get(id).ok_or_else(|| ApiError::NoSession(id.to_string()))
}

async fn create(State(state): State<AppState>, body: Option<Json<NewSession>>) -> Result<Response, ApiError> {
    let new = body.map(|Json(b)| b).unwrap_or_default();
    let (id, _) = state.create(new)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id, "v": PROTOCOL_VERSION }))).into_response())
}

async fn snapshot(
    State(state): State<AppState>,
    Path((id, kind)): Path<(String, SnapshotKind)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let snaps = lookup(&state, &id)?.snapshots()?;
    Ok(Json(snaps.document(kind)))
}

async fn save(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSave>, ApiError> {
    Ok(Json(lookup(&state, &id)?.save().await?))
}

async fn load(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(save): Json<SessionSave>,
) -> Result<StatusCode, ApiError> {
    lookup(&state, &id)?.load(save).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn close(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    lookup(&state, &id)?.close().await;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn ws(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = lookup(&state, &id)?;
    if handle.is_closed() {
        return Err(SessionError::SessionClosed.into());
    }
    // registered before the upgrade so connections take over in request order
    let (me, current) = handle.connect();
    Ok(upgrade.on_upgrade(move |socket| channel(socket, handle, q.since, me, current)))
}

fn frame(e: &Envelope) -> Message {
    Message::Text(serde_json::to_string(e).expect("envelopes serialize").into())
}

fn error_frame(reply_to: Option<u64>, code: ErrorCode, message: String) -> Message {
    // seq 0 marks a connection-local frame that is not part of the session log
    frame(&Envelope::new(0, Body::Error { reply_to, code, message }))
}

/// Drives one instructor connection until it closes or a newer one replaces it.
async fn channel(
    mut socket: WebSocket,
    handle: SessionHandle,
    since: u64,
    me: u64,
    mut current: tokio::sync::watch::Receiver<u64>,
) {
    if *current.borrow_and_update() != me {
        return;
    }
    let (backlog, mut live) = handle.attach(since);
    let mut sent = since;
    for e in &backlog {
        if socket.send(frame(e)).await.is_err() {
            return;
        }
        sent = e.seq;
    }
    loop {
        tokio::select! {
            changed = current.changed() => {
                if changed.is_err() || *current.borrow() != me {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            }
            () = handle.closed() => {
                // anything emitted before the close goes out first
                for e in handle.replay(sent) {
                    if socket.send(frame(&e)).await.is_err() {
                        return;
                    }
                }
                let _ = socket
                    .send(error_frame(None, ErrorCode::SessionClosed, SessionError::SessionClosed.to_string()))
                    .await;
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
            out = live.recv() => {
                let frames = match out {
                    Ok(e) if e.seq > sent => vec![e],
                    Ok(_) => continue,
                    Err(RecvError::Lagged(_)) => handle.replay(sent),
                    Err(RecvError::Closed) => return,
                };
                for e in frames {
                    if socket.send(frame(&e)).await.is_err() {
                        return;
                    }
                    sent = e.seq;
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                if let Some(reply) = submit(&handle, text.as_str()).await {
                    if socket.send(reply).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}

/// Queues one client frame. Returns a connection-local reply for frames the
/// session never sees.
async fn submit(handle: &SessionHandle, text: &str) -> Option<Message> {
    let e: Envelope = match serde_json::from_str(text) {
        Ok(e) => e,
        Err(err) => return Some(error_frame(None, ErrorCode::BadMessage, err.to_string())),
    };
    if e.v != PROTOCOL_VERSION {
        return Some(error_frame(Some(e.seq), ErrorCode::Version, format!("unsupported version {}", e.v)));
    }
    let r = match e.body {
        Body::Utterance { text } => handle.utterance(e.seq, &text).await,
        Body::Click { object } => match handle.click(e.seq, object).await {
            // reported on the stream with the session's own seq
            Err(SessionError::UnknownObject(_)) => Ok(()),
            r => r,
        },
        _ => return Some(error_frame(Some(e.seq), ErrorCode::BadMessage, "not a client message".into())),
    };
    match r {
        Ok(()) => None,
        Err(err) => Some(error_frame(Some(e.seq), ErrorCode::SessionClosed, err.to_string())),
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}", axum::routing::delete(close))
        .route("/session/{id}/snapshot/{kind}", get(snapshot))
        .route("/session/{id}/save", post(save))
        .route("/session/{id}/load", post(load))
        .route("/session/{id}/ws", get(ws))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app(AppState::default())).await
}
