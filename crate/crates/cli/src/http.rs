//! HTTP API over [`Service`]. Events are served as newline-delimited JSON;
//! with `follow=true` the response stays open and carries live events.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::mpsc;

use crate::api::{parse_with_path, ApiError, ErrorKind};
use crate::service::Service;

/// How long a follower waits for new events before checking whether its
/// client is still there.
const POLL: Duration = Duration::from_millis(250);

pub fn status_of(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::Io => StatusCode::INTERNAL_SERVER_ERROR,
        ErrorKind::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
    }
}

struct Failure(ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (status_of(self.0.kind), Json(self.0)).into_response()
    }
}

type Result<T> = std::result::Result<T, Failure>;

async fn blocking<T, F>(f: F) -> Result<T>
where
    F: FnOnce() -> std::result::Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure(ApiError::new(ErrorKind::Unavailable, e.to_string())))?
        .map_err(Failure)
}

fn json_body(bytes: &Bytes) -> Result<Value> {
    if bytes.is_empty() {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_slice(bytes).map_err(|e| {
        Failure(ApiError::new(
            ErrorKind::Validation,
            format!("body is not JSON: {e}"),
        ))
    })
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/model", get(model))
        .route("/experiments", get(list).post(create))
        .route("/experiments/{id}", get(summary))
        .route("/experiments/{id}/commands", post(command))
        .route("/experiments/{id}/events", get(events))
        .with_state(service)
}

async fn model(State(s): State<Arc<Service>>) -> Response {
    Json(s.model().clone()).into_response()
}

async fn list(State(s): State<Arc<Service>>) -> Response {
    Json(s.list()).into_response()
}

async fn create(State(s): State<Arc<Service>>, body: Bytes) -> Result<Response> {
    let req = parse_with_path(json_body(&body)?)?;
    let summary = blocking(move || s.create(req)).await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn summary(State(s): State<Arc<Service>>, Path(id): Path<String>) -> Result<Response> {
    let summary = blocking(move || s.summary(&id)).await?;
    Ok(Json(summary).into_response())
}

async fn command(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response> {
    let raw = json_body(&body)?;
    let ack = blocking(move || s.handle_command(&id, raw)).await?;
    Ok(Json(ack).into_response())
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    #[serde(default)]
    from: u64,
    #[serde(default)]
    follow: bool,
}

async fn events(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
) -> Result<Response> {
    let first = {
        let (s, id) = (s.clone(), id.clone());
        blocking(move || s.events(&id, q.from, None)).await?
    };
    let (tx, rx) = mpsc::channel::<Bytes>(64);
    let mut cursor = q.from;
    let mut lines = Vec::with_capacity(first.len());
    for ev in first {
        cursor = ev.seq + 1;
        lines.push(ndjson(&ev));
    }
    let follow = q.follow;
    std::thread::Builder::new()
        .name(format!("events-{id}"))
        .spawn(move || {
            for line in lines {
                if tx.blocking_send(line).is_err() {
                    return;
                }
            }
            while follow && !tx.is_closed() && !s.is_closed() {
                let Ok(batch) = s.events(&id, cursor, Some(POLL)) else {
                    return;
                };
                for ev in batch {
                    cursor = ev.seq + 1;
                    if tx.blocking_send(ndjson(&ev)).is_err() {
                        return;
                    }
                }
            }
        })
        .map_err(|e| Failure(ApiError::new(ErrorKind::Unavailable, e.to_string())))?;
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, Infallible>(b), rx))
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(stream),
    )
        .into_response())
}

fn ndjson<T: serde::Serialize>(value: &T) -> Bytes {
    let mut line = serde_json::to_vec(value).expect("events serialize");
    line.push(b'\n');
    Bytes::from(line)
}

/// Serves until ctrl-c, then stops the experiment workers.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = router(service.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    tokio::task::spawn_blocking(move || service.shutdown())
        .await
        .map_err(std::io::Error::other)?;
    Ok(())
}
