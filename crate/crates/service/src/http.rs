//! HTTP and WebSocket routes over an [`Engine`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emocue_core::Message;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;

use crate::engine::{Engine, ReplayRequest};
use crate::error::ServiceError;
use crate::wire::{ClientFrame, ServerFrame};

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    token: Option<Arc<str>>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Invalid(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Core(emocue_core::Error::Unavailable(_)) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Core(emocue_core::Error::File { .. }) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

/// Routes under `/v1`. With a token, every route except health requires
/// `Authorization: Bearer <token>` (or `?token=` on the stream).
pub fn router(engine: Arc<Engine>, token: Option<String>) -> Router {
    let state = AppState {
        engine,
        token: token.map(Into::into),
    };
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/messages", post(post_message))
        .route("/v1/conversations/{id}/state", get(get_state))
        .route("/v1/replay", post(post_replay))
        .route("/v1/stream", get(stream))
        .with_state(state)
}

fn authorize(state: &AppState, headers: &HeaderMap, query_token: Option<&str>) -> Result<(), ServiceError> {
    let Some(expected) = state.token.as_deref() else {
        return Ok(());
    };
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if bearer == Some(expected) || query_token == Some(expected) {
        Ok(())
    } else {
        Err(ServiceError::Unauthorized)
    }
}

async fn healthz(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.engine.health())
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::Invalid(e.to_string()))
}

async fn post_message(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ServiceError> {
    authorize(&state, &headers, None)?;
    let message: Message = parse_json(&body)?;
    let engine = state.engine.clone();
    let ingested = tokio::task::spawn_blocking(move || engine.ingest(message))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    let status = if ingested.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ingested)).into_response())
}

async fn get_state(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    authorize(&state, &headers, None)?;
    Ok(Json(state.engine.state(&id)?).into_response())
}

async fn post_replay(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ServiceError> {
    authorize(&state, &headers, None)?;
    let request: ReplayRequest = parse_json(&body)?;
    let engine = state.engine.clone();
    let summary = tokio::task::spawn_blocking(move || engine.replay(&request.path, request.speed))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    Ok(Json(summary).into_response())
}

#[derive(Deserialize)]
struct StreamQuery {
    user: Option<String>,
    token: Option<String>,
}

async fn stream(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(query): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    authorize(&state, &headers, query.token.as_deref())?;
    let engine = state.engine.clone();
    Ok(ws.on_upgrade(move |socket| run_stream(engine, query.user, socket)))
}

async fn run_stream(engine: Arc<Engine>, user: Option<String>, socket: WebSocket) {
    let mut sub = engine.subscribe(user);
    let sub_id = sub.id;
    let (mut sink, mut incoming) = socket.split();
    // replies to the client's own frames share the outbound queue
    let (reply_tx, mut replies) = tokio::sync::mpsc::unbounded_channel::<String>();

    let writer = tokio::spawn(async move {
        loop {
            let text: String = tokio::select! {
                frame = sub.frames.recv() => match frame {
                    Some(f) => f.to_string(),
                    None => break,
                },
                reply = replies.recv() => match reply {
                    Some(r) => r,
                    None => break,
                },
            };
            if sink.send(WsMessage::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = incoming.next().await {
        let text = match msg {
            WsMessage::Text(t) => t.to_string(),
            WsMessage::Close(_) => break,
            _ => continue,
        };
        let outcome = match serde_json::from_str::<ClientFrame>(&text) {
            Ok(ClientFrame::Send { message }) => {
                let engine = engine.clone();
                match tokio::task::spawn_blocking(move || engine.ingest(message)).await {
                    Ok(r) => r.map(|_| ()),
                    Err(e) => Err(ServiceError::Io(std::io::Error::other(e))),
                }
            }
            Err(e) => Err(ServiceError::Invalid(e.to_string())),
        };
        if let Err(e) = outcome {
            let frame = ServerFrame::Error { error: e.to_string() };
            let _ = reply_tx.send(serde_json::to_string(&frame).expect("frames serialize"));
        }
    }
    engine.unsubscribe(sub_id);
    writer.abort();
}
