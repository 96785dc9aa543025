//! HTTP routes over a shared [`Queue`].

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use storypref_core::Dimension;

use crate::queue::{Outcome, Queue, QueueError};

/// Header naming the annotator when the query or body does not.
pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

pub struct Service {
    queue: Mutex<Queue>,
    tie_tolerance: f64,
    priority: [Dimension; 5],
}

impl Service {
    pub fn new(queue: Queue, tie_tolerance: f64, priority: [Dimension; 5]) -> Arc<Self> {
        Arc::new(Service {
            queue: Mutex::new(queue),
            tie_tolerance,
            priority,
        })
    }

    /// Runs `f` with exclusive access to the queue.
    pub fn with_queue<T>(&self, f: impl FnOnce(&mut Queue) -> T) -> T {
        let mut q = self.queue.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut q)
    }
}

struct ApiError(QueueError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            QueueError::UnknownTask(_) => StatusCode::NOT_FOUND,
            QueueError::NotAssigned { .. } => StatusCode::FORBIDDEN,
            QueueError::AlreadyFinal(_) => StatusCode::CONFLICT,
            QueueError::OutcomeNotAllowed { .. } | QueueError::MalformedRanking(_) => StatusCode::UNPROCESSABLE_ENTITY,
            QueueError::MissingAnnotator => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({"error": self.0.to_string()}))).into_response()
    }
}

impl From<QueueError> for ApiError {
    fn from(e: QueueError) -> Self {
        ApiError(e)
    }
}

fn annotator_from(explicit: Option<String>, headers: &HeaderMap) -> Result<String, ApiError> {
    explicit
        .or_else(|| headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string))
        .filter(|a| !a.trim().is_empty())
        .ok_or(ApiError(QueueError::MissingAnnotator))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(State(svc): State<Arc<Service>>, Query(q): Query<NextQuery>, headers: HeaderMap) -> Result<Response, ApiError> {
    let annotator = annotator_from(q.annotator, &headers)?;
    match svc.with_queue(|queue| queue.next_task(&annotator))? {
        Some(task) => Ok(Json(task).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

#[derive(Deserialize)]
struct SubmitBody {
    #[serde(default)]
    annotator_id: Option<String>,
    outcome: Outcome,
}

async fn submit(
    State(svc): State<Arc<Service>>,
    Path(task_id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<SubmitBody>,
) -> Result<Response, ApiError> {
    let annotator = annotator_from(body.annotator_id, &headers)?;
    let ack = svc.with_queue(|q| q.submit(&task_id, &annotator, body.outcome))?;
    Ok(Json(ack).into_response())
}

async fn progress(State(svc): State<Arc<Service>>) -> Response {
    Json(svc.with_queue(|q| q.progress())).into_response()
}

async fn qc_flags(State(svc): State<Arc<Service>>) -> Response {
    Json(svc.with_queue(|q| q.qc_flags().to_vec())).into_response()
}

async fn export_decisions(State(svc): State<Arc<Service>>) -> Response {
    Json(svc.with_queue(|q| q.decisions())).into_response()
}

async fn export_benchmark(State(svc): State<Arc<Service>>) -> Result<Response, ApiError> {
    let bench = svc.with_queue(|q| q.export_benchmark(svc.tie_tolerance, &svc.priority))?;
    Ok(Json(bench).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/task/next", get(next_task))
        .route("/api/task/{id}/submit", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/qc/flags", get(qc_flags))
        .route("/api/export/decisions", get(export_decisions))
        .route("/api/export/benchmark", get(export_benchmark))
        .with_state(service)
}

/// A server bound to a local port and running on its own thread. Used by
/// tests and embedding callers; dropping it shuts the server down.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<RunningServer> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers");
            let _ = axum::serve(listener, router(service))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
