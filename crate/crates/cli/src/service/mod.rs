//! Local session service: HTTP to open and close sessions, a WebSocket per
//! session to send handles and receive deformed frames.

mod messages;
mod session;

pub use messages::{ErrorBody, Frame, Inbound, Outbound, SessionSummary};
pub use session::{
    prepare, Published, ServiceConfig, Session, SessionError, SessionStore, DEFAULT_MAX_BODY_BYTES,
    DEFAULT_MAX_VERTICES,
};

use crate::exit::{Failure, Status};
use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use std::future::Future;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody {
            error: self.slug().to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(store: SessionStore) -> Router {
    let limit = store.config().max_body_bytes;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary).delete(close_session))
        .route("/sessions/{id}/handles", post(post_handles))
        .route("/sessions/{id}/stream", get(open_stream))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(store)
}

/// Serves `store` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    store: SessionStore,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}

/// Runs the service with default settings until interrupted.
pub fn run_blocking(host: IpAddr, port: u16, out: &mut impl Write) -> Result<(), Failure> {
    let failure = |e: std::io::Error| Failure::new(Status::ServeFailure, e.to_string());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(failure)?;
    runtime.block_on(async {
        let listener = TcpListener::bind(SocketAddr::new(host, port)).await.map_err(failure)?;
        let addr = listener.local_addr().map_err(failure)?;
        writeln!(out, "listening on http://{addr}").map_err(failure)?;
        out.flush().map_err(failure)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, SessionStore::default(), shutdown).await.map_err(failure)
    })
}

async fn create_session(State(store): State<SessionStore>, body: Bytes) -> Result<Json<SessionSummary>, SessionError> {
    let config = store.config().clone();
    let (mesh, rig) = tokio::task::spawn_blocking(move || prepare(&body, &config))
        .await
        .map_err(|e| SessionError::Deform(e.to_string()))??;
    Ok(Json(store.insert(mesh, rig)?.summary()))
}

async fn session_summary(State(store): State<SessionStore>, Path(id): Path<String>) -> Result<Json<SessionSummary>, SessionError> {
    Ok(Json(store.get(&id)?.summary()))
}

async fn close_session(State(store): State<SessionStore>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, SessionError> {
    store.close(&id)?;
    Ok(Json(serde_json::json!({ "closed": id })))
}

/// Queues a handle set and replies with the first frame at or after it.
async fn post_handles(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    Json(message): Json<Inbound>,
) -> Result<Json<Outbound>, SessionError> {
    let session = store.get(&id)?;
    let Inbound::Handles { revision, handles } = message;
    let accepted = session.submit(&handles, revision)?;
    match session.result_for(accepted).await {
        Some(published) => Ok(Json(published.to_message())),
        None => Err(SessionError::NotFound(id)),
    }
}

async fn open_stream(
    State(store): State<SessionStore>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, SessionError> {
    let session = store.get(&id)?;
    Ok(ws.on_upgrade(move |socket| stream(socket, session)))
}

fn encode(message: &Outbound) -> Message {
    Message::Text(serde_json::to_string(message).expect("messages serialize").into())
}

/// Topology first, then the current frame if any, then every new frame
/// and every rejected message until either side closes.
async fn stream(socket: WebSocket, session: Arc<Session>) {
    let (mut sink, mut source) = socket.split();
    let mut frames = session.frames();
    let closed = session.until_closed();
    let (errors, mut rejected) = mpsc::unbounded_channel::<Outbound>();

    let reader = {
        let session = session.clone();
        async move {
            while let Some(Ok(message)) = source.next().await {
                let text = match message {
                    Message::Text(text) => text,
                    Message::Close(_) => break,
                    _ => continue,
                };
                let outcome = serde_json::from_str::<Inbound>(&text)
                    .map_err(|e| (400, e.to_string(), None))
                    .and_then(|Inbound::Handles { revision, handles }| {
                        session
                            .submit(&handles, revision)
                            .map_err(|e| (e.status(), e.to_string(), revision))
                    });
                if let Err((status, message, client_revision)) = outcome {
                    let _ = errors.send(Outbound::Error {
                        status,
                        message,
                        client_revision,
                    });
                }
            }
        }
    };

    let writer = async move {
        tokio::pin!(closed);
        if sink.send(encode(&session.topology())).await.is_err() {
            return;
        }
        let current = frames.borrow_and_update().clone();
        if let Some(published) = current {
            if sink.send(encode(&published.to_message())).await.is_err() {
                return;
            }
        }
        loop {
            let message = tokio::select! {
                changed = frames.changed() => {
                    if changed.is_err() {
                        break;
                    }
                    let latest = frames.borrow_and_update().clone();
                    match latest {
                        Some(published) => published.to_message(),
                        None => continue,
                    }
                }
                Some(error) = rejected.recv() => error,
                _ = &mut closed => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            };
            if sink.send(encode(&message)).await.is_err() {
                break;
            }
        }
    };

    tokio::select! {
        _ = reader => {}
        _ = writer => {}
    }
}
