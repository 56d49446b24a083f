mod common;

use std::time::Duration;

use axum::body::Body as HttpBody;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

use grounded_server::{app, AppState, Body, Envelope, ErrorCode, SessionSave};

use common::new_session;

async fn call(state: &AppState, method: &str, uri: &str, body: Option<String>) -> (StatusCode, serde_json::Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            HttpBody::from(b)
        }
        None => HttpBody::empty(),
    };
    let resp = app(state.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    (status, json)
}

async fn create(state: &AppState) -> String {
    let (status, json) = call(state, "POST", "/session", Some(serde_json::to_string(&new_session()).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json["v"], 1);
    json["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_without_a_body_gives_an_empty_table() {
    let state = AppState::default();
    let (status, json) = call(&state, "POST", "/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = json["id"].as_str().unwrap();
    let (status, snap) = call(&state, "GET", &format!("/session/{id}/snapshot/scene"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["document"]["objects"], serde_json::json!([]));
}

#[tokio::test]
async fn every_snapshot_kind_is_served() {
    let state = AppState::default();
    let id = create(&state).await;
    for kind in ["scene", "stack", "semantic", "episodic", "transcript"] {
        let (status, snap) = call(&state, "GET", &format!("/session/{id}/snapshot/{kind}"), None).await;
        assert_eq!(status, StatusCode::OK, "{kind}");
        assert_eq!(snap["kind"], kind);
        assert_eq!(snap["seq"], 1);
    }
    let (status, _) = call(&state, "GET", &format!("/session/{id}/snapshot/mood"), None).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn unknown_and_closed_sessions() {
    let state = AppState::default();
    let (status, json) = call(&state, "GET", "/session/s999/snapshot/scene", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json["error"], "no_session");

    let id = create(&state).await;
    let (status, _) = call(&state, "DELETE", &format!("/session/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, json) = call(&state, "GET", &format!("/session/{id}/snapshot/stack"), None).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(json["error"], "session_closed");
    let (status, _) = call(&state, "POST", &format!("/session/{id}/save"), None).await;
    assert_eq!(status, StatusCode::GONE);
}

#[tokio::test]
async fn save_and_load_over_http() {
    let state = AppState::default();
    let a = create(&state).await;
    let handle = state.get(&a).unwrap();
    handle.click(1, "o1".parse().unwrap()).await.unwrap();
    handle.utterance(2, "This is a triangle").await.unwrap();
    handle.utterance(3, "Shape").await.unwrap();
    handle.settle().await.unwrap();

    let (status, save) = call(&state, "POST", &format!("/session/{a}/save"), None).await;
    assert_eq!(status, StatusCode::OK);
    let parsed: SessionSave = serde_json::from_value(save.clone()).unwrap();
    assert_eq!(parsed.version, 1);

    // into a fresh session, through the create body
    let body = serde_json::json!({ "save": save }).to_string();
    let (status, json) = call(&state, "POST", "/session", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    let b = json["id"].as_str().unwrap();
    // and over a running one
    let c = create(&state).await;
    let (status, _) = call(&state, "POST", &format!("/session/{c}/load"), Some(save.to_string())).await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    let (_, sa) = call(&state, "GET", &format!("/session/{a}/snapshot/semantic"), None).await;
    for other in [b, c.as_str()] {
        let (_, so) = call(&state, "GET", &format!("/session/{other}/snapshot/semantic"), None).await;
        assert_eq!(sa["document"], so["document"]);
    }

    let mut bad = save.clone();
    bad["version"] = 2.into();
    let (status, json) = call(&state, "POST", &format!("/session/{c}/load"), Some(bad.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json["error"], "version");
}

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn listen() -> (std::net::SocketAddr, AppState) {
    let state = AppState::default();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let router = app(state.clone());
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    (addr, state)
}

async fn connect(addr: std::net::SocketAddr, id: &str, since: u64) -> Ws {
    let url = format!("ws://{addr}/session/{id}/ws?since={since}");
    tokio_tungstenite::connect_async(url).await.unwrap().0
}

async fn send(ws: &mut Ws, seq: u64, kind: &str, payload: serde_json::Value) {
    let frame = serde_json::json!({ "v": 1, "type": kind, "seq": seq, "payload": payload });
    ws.send(Message::text(frame.to_string())).await.unwrap();
}

async fn next(ws: &mut Ws) -> Option<Envelope> {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("frame within 5 s")? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

/// Reads up to and including the session's reply to client frame `reply_to`.
async fn until_reply(ws: &mut Ws, reply_to: u64) -> Vec<Envelope> {
    let mut got = Vec::new();
    loop {
        let e = next(ws).await.expect("stream open");
        let done = matches!(e.body, Body::Ack { reply_to: r, .. } | Body::Error { reply_to: Some(r), .. } if r == reply_to);
        got.push(e);
        if done {
            return got;
        }
    }
}

#[tokio::test]
async fn websocket_chat_click_and_moves() {
    let (addr, state) = listen().await;
    let id = create(&state).await;
    let mut ws = connect(addr, &id, 0).await;
    let first = next(&mut ws).await.unwrap();
    assert_eq!(first.seq, 1);
    assert!(matches!(first.body, Body::SceneUpdate { .. }));

    send(&mut ws, 1, "click", serde_json::json!({ "object": "o1" })).await;
    send(&mut ws, 2, "utterance", serde_json::json!({ "text": "This is a triangle" })).await;
    send(&mut ws, 3, "click", serde_json::json!({ "object": "o42" })).await;
    send(&mut ws, 4, "utterance", serde_json::json!({ "text": "" })).await;
    let frames = until_reply(&mut ws, 4).await;
    let seqs: Vec<u64> = frames.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (2..2 + seqs.len() as u64).collect::<Vec<_>>());
    assert_eq!(frames[0].body, Body::Ack { reply_to: 1, selection: Some("o1".parse().unwrap()) });
    assert_eq!(frames[1].body, Body::Ack { reply_to: 2, selection: Some("o1".parse().unwrap()) });
    assert!(matches!(&frames[2].body, Body::AgentUtterance { text, .. } if text.contains("triangle")));
    let n = frames.len();
    assert!(matches!(frames[n - 2].body, Body::Error { reply_to: Some(3), code: ErrorCode::UnknownObject, .. }));
    assert_eq!(frames[n - 1].body, Body::Ack { reply_to: 4, selection: None });
}

#[tokio::test]
async fn bad_frames_get_a_local_error() {
    let (addr, state) = listen().await;
    let id = create(&state).await;
    let mut ws = connect(addr, &id, 1).await;
    ws.send(Message::text("not json")).await.unwrap();
    let e = next(&mut ws).await.unwrap();
    assert_eq!(e.seq, 0);
    assert!(matches!(e.body, Body::Error { code: ErrorCode::BadMessage, .. }));
    let frame = serde_json::json!({ "v": 7, "type": "utterance", "seq": 3, "payload": { "text": "hi" } });
    ws.send(Message::text(frame.to_string())).await.unwrap();
    let e = next(&mut ws).await.unwrap();
    assert!(matches!(e.body, Body::Error { reply_to: Some(3), code: ErrorCode::Version, .. }));
    // server frame types are not accepted from the client
    send(&mut ws, 4, "ack", serde_json::json!({ "reply_to": 1 })).await;
    let e = next(&mut ws).await.unwrap();
    assert!(matches!(e.body, Body::Error { reply_to: Some(4), code: ErrorCode::BadMessage, .. }));
}

#[tokio::test]
async fn reconnect_resumes_without_gaps_or_repeats() {
    let (addr, state) = listen().await;
    let id = create(&state).await;
    let mut ws = connect(addr, &id, 0).await;
    send(&mut ws, 1, "click", serde_json::json!({ "object": "o1" })).await;
    send(&mut ws, 2, "utterance", serde_json::json!({ "text": "This is a triangle" })).await;
    let mut seen = vec![next(&mut ws).await.unwrap(), next(&mut ws).await.unwrap()];
    drop(ws);
    // more frames are produced while nobody is connected
    let handle = state.get(&id).unwrap();
    handle.utterance(3, "Shape").await.unwrap();
    let last = handle.settle().await.unwrap().seq;

    let mut ws = connect(addr, &id, seen.last().unwrap().seq).await;
    while seen.last().unwrap().seq != last {
        seen.push(next(&mut ws).await.unwrap());
    }
    let seqs: Vec<u64> = seen.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (1..=last).collect::<Vec<_>>());
    assert_eq!(seen, handle.replay(0));
}

#[tokio::test]
async fn newer_connection_replaces_the_older() {
    let (addr, state) = listen().await;
    let id = create(&state).await;
    let mut old = connect(addr, &id, 1).await;
    let mut new = connect(addr, &id, 1).await;
    assert!(next(&mut old).await.is_none());
    send(&mut new, 1, "utterance", serde_json::json!({ "text": "" })).await;
    assert_eq!(next(&mut new).await.unwrap().body, Body::Ack { reply_to: 1, selection: None });
}

#[tokio::test]
async fn closing_the_session_ends_the_channel() {
    let (addr, state) = listen().await;
    let id = create(&state).await;
    let mut ws = connect(addr, &id, 1).await;
    state.get(&id).unwrap().close().await;
    let e = next(&mut ws).await.unwrap();
    assert!(matches!(e.body, Body::Error { code: ErrorCode::SessionClosed, .. }));
    assert!(next(&mut ws).await.is_none());
    let url = format!("ws://{addr}/session/{id}/ws");
    assert!(tokio_tungstenite::connect_async(url).await.is_err());
}
