//! HTTP session service for correcting explanations by hand.
//!
//! Endpoints (JSON in and out):
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | `POST` | `/sessions` | [`CreateSession`] | `{"id": ...}` |
//! | `GET` | `/sessions/{id}/query` | | [`QueryView`] |
//! | `POST` | `/sessions/{id}/corrections` | [`SubmitCorrection`] | [`CorrectionAck`] |
//! | `POST` | `/sessions/{id}/retrain` | optional [`RetrainRequest`] | [`MetricEntry`] |
//! | `GET` | `/sessions/{id}/metrics` | | [`MetricsView`] |
//! | `GET` | `/health` | | `{"status": "ok"}` |
//!
//! Errors come back as [`ErrorBody`] with status 400 (validation), 404
//! (unknown session or sample) or 409 (pending corrections, duplicate
//! submission).

pub mod error;
pub mod log;
pub mod session;

use std::collections::{BTreeSet, HashMap};
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use ifa_core::augmentation::Correction;
use ifa_core::engine::MetricEntry;
use ifa_core::experiment::Experiment;

pub use error::{ErrorBody, ServiceError};
pub use log::Event;
pub use session::{CorrectionAck, CreateSession, MetricsView, QuerySample, QueryView, SampleStatus, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitCorrection {
    pub sample_id: usize,
    pub correction: Correction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrainRequest {
    /// Pending samples to drop from this retrain.
    #[serde(default)]
    pub skip: BTreeSet<usize>,
}

struct Entry {
    session: Session,
    log: Option<log::EventLog>,
}

impl Entry {
    fn record(&mut self, event: &Event) -> Result<(), ServiceError> {
        if let Some(log) = &mut self.log {
            log.append(event)?;
        }
        Ok(())
    }
}

type Shared = Arc<tokio::sync::RwLock<Entry>>;

/// Shared service state: the served experiment and the live sessions.
#[derive(Clone)]
pub struct AppState {
    experiment: Arc<Experiment>,
    log_dir: Option<PathBuf>,
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
}

impl AppState {
    /// `log_dir = None` disables event logs.
    pub fn new(experiment: Experiment, log_dir: Option<PathBuf>) -> Self {
        Self {
            experiment: Arc::new(experiment),
            log_dir,
            sessions: Arc::default(),
        }
    }

    fn get(&self, id: &str) -> Result<Shared, ServiceError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session `{id}`")))
    }

    /// Flushes every session log to disk.
    pub async fn sync_logs(&self) -> std::io::Result<()> {
        let entries: Vec<Shared> = self.sessions.read().expect("session map lock").values().cloned().collect();
        for e in entries {
            if let Some(log) = &e.read().await.log {
                log.sync()?;
            }
        }
        Ok(())
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create(State(app): State<AppState>, body: Bytes) -> Result<Json<Created>, ServiceError> {
    let req: CreateSession = parse(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let experiment = Arc::clone(&app.experiment);
    let log_dir = app.log_dir.clone();
    let entry = blocking(move || {
        let session = Session::create(id.clone(), &experiment, &req)?;
        let log = log_dir.map(|d| log::EventLog::create(&d, &id)).transpose()?;
        let mut entry = Entry { session, log };
        entry.record(&Event::Created { id, request: req })?;
        Ok(entry)
    })
    .await?;
    let id = entry.session.id().to_string();
    app.sessions
        .write()
        .expect("session map lock")
        .insert(id.clone(), Arc::new(tokio::sync::RwLock::new(entry)));
    Ok(Json(Created { id }))
}

async fn query(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<QueryView>, ServiceError> {
    let entry = app.get(&id)?;
    let view = entry.read().await.session.query();
    Ok(Json(view))
}

async fn correct(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CorrectionAck>, ServiceError> {
    let req: SubmitCorrection = parse(&body)?;
    let mut entry = app.get(&id)?.write_owned().await;
    blocking(move || {
        let ack = entry.session.submit(req.sample_id, req.correction.clone())?;
        entry.record(&Event::Corrected {
            sample_id: req.sample_id,
            correction: req.correction,
        })?;
        Ok(Json(ack))
    })
    .await
}

async fn retrain(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MetricEntry>, ServiceError> {
    let req: RetrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RetrainRequest::default()
    } else {
        parse(&body)?
    };
    let mut entry = app.get(&id)?.write_owned().await;
    blocking(move || {
        let metric = entry.session.retrain(&req.skip)?;
        entry.record(&Event::Retrained {
            skip: req.skip,
            metric: metric.metric,
        })?;
        Ok(Json(metric))
    })
    .await
}

async fn metrics(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<MetricsView>, ServiceError> {
    let entry = app.get(&id)?;
    let view = entry.read().await.session.metrics();
    Ok(Json(view))
}

fn parse<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}/query", get(query))
        .route("/sessions/{id}/corrections", post(correct))
        .route("/sessions/{id}/retrain", post(retrain))
        .route("/sessions/{id}/metrics", get(metrics))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then flushes the session logs.
pub async fn serve(listener: TcpListener, state: AppState, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.sync_logs().await
}

/// A service running on its own runtime thread; used by tests and drivers.
pub struct RunningService {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl RunningService {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Signals shutdown and waits for logs to be flushed.
    pub fn stop(mut self) -> std::io::Result<()> {
        self.stop_inner()
    }

    fn stop_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().map_err(|_| std::io::Error::other("service thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background
/// thread.
pub fn spawn(state: AppState, addr: &str) -> std::io::Result<RunningService> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let listener = runtime.block_on(TcpListener::bind(addr))?;
    let local = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(serve(listener, state, async {
            let _ = rx.await;
        }))
    });
    Ok(RunningService {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book {}
