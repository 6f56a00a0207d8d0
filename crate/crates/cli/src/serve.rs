//! JSON over HTTP. One ingestion at a time; queries read the latest
//! snapshot without blocking on the writer.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bgmem_core::extractor::Session;
use bgmem_core::llm::TokenUsage;
use bgmem_core::memory::MemoryStats;
use bgmem_core::model::{to_snapshot, LongTermMemory, RetrievalPlan};
use bgmem_core::pipeline::SessionReport;
use bgmem_core::retrieval::{RetrievalError, StopTrace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::AppConfig;
use crate::engine::{read_snapshot, write_snapshot, Engine};
use crate::Failure;

pub struct AppState {
    engine: Engine,
    memory: RwLock<Arc<LongTermMemory>>,
    writer: tokio::sync::Mutex<()>,
    persist: Option<PathBuf>,
    faults: AtomicU64,
}

impl AppState {
    pub fn new(engine: Engine, memory: LongTermMemory, persist: Option<PathBuf>) -> Self {
        AppState {
            engine,
            memory: RwLock::new(Arc::new(memory)),
            writer: tokio::sync::Mutex::new(()),
            persist,
            faults: AtomicU64::new(0),
        }
    }

    /// Held for the duration of an ingestion.
    pub fn writer(&self) -> &tokio::sync::Mutex<()> {
        &self.writer
    }

    pub fn current(&self) -> Arc<LongTermMemory> {
        self.memory.read().expect("memory lock poisoned").clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub answer: String,
    pub selected: Vec<String>,
    pub trace: StopTrace,
    pub plan: RetrievalPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session: SessionReport,
    pub stats: MemoryStats,
    pub usage: TokenUsage,
}

struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn bad_request(message: impl Into<String>, path: Option<String>) -> ApiError {
    let mut body = json!({ "error": message.into() });
    if let Some(p) = path {
        body["path"] = json!(p);
    }
    ApiError { status: StatusCode::BAD_REQUEST, body }
}

/// Log the detail and return only an id the operator can search for.
fn internal(state: &AppState, detail: impl std::fmt::Display) -> ApiError {
    let n = state.faults.fetch_add(1, Ordering::Relaxed) + 1;
    let id = format!("fault-{}-{n}", std::process::id());
    log::error!("{id}: {detail}");
    ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, body: json!({ "error": "internal error", "id": id }) }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        bad_request(e.into_inner().to_string(), Some(path))
    })
}

async fn health(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let m = s.current();
    Json(json!({ "status": "ok", "hyperedges": m.hyperedges.len(), "nodes": m.nodes.len() }))
}

async fn snapshot(State(s): State<Arc<AppState>>) -> Response {
    let text = to_snapshot(&s.current());
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn query(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<QueryResponse>, ApiError> {
    let req: QueryRequest = parse_body(&body)?;
    if req.query.trim().is_empty() {
        return Err(bad_request("query is empty", Some("query".into())));
    }
    let memory = s.current();
    let st = s.clone();
    let out = tokio::task::spawn_blocking(move || st.engine.query(&memory, &req.query))
        .await
        .map_err(|e| internal(&s, e))?;
    match out {
        Ok(a) => Ok(Json(QueryResponse {
            answer: a.answer,
            selected: a.result.selected,
            trace: a.result.stop_trace,
            plan: a.result.plan,
            note: a.result.note,
            usage: {
                let mut u = a.result.usage;
                u.add(a.answer_usage);
                u
            },
        })),
        Err(RetrievalError::EmptyQuery) => Err(bad_request("query is empty", Some("query".into()))),
        Err(e) => Err(internal(&s, e)),
    }
}

async fn sessions(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<SessionResponse>, ApiError> {
    let session: Session = parse_body(&body)?;
    if let Err(e) = session.validate() {
        return Err(bad_request(e.to_string(), None));
    }
    let Ok(guard) = s.writer.try_lock() else {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({ "error": "another ingestion is in progress; retry when it finishes" }),
        });
    };
    let current = s.current();
    let st = s.clone();
    let outcome = tokio::task::spawn_blocking(move || -> anyhow::Result<_> {
        let (memory, report) = st.engine.ingest(&current, std::slice::from_ref(&session))?;
        if let Some(p) = &st.persist {
            write_snapshot(p, &memory)?;
        }
        Ok((memory, report))
    })
    .await
    .map_err(|e| internal(&s, e))?;
    let (memory, report) = outcome.map_err(|e| internal(&s, format!("{e:#}")))?;
    let stats = report.stats;
    *s.memory.write().expect("memory lock poisoned") = Arc::new(memory);
    drop(guard);
    let session = report.sessions.into_iter().next().expect("one session ingested");
    Ok(Json(SessionResponse { session, stats, usage: report.usage }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/snapshot", get(snapshot))
        .route("/query", post(query))
        .route("/sessions", post(sessions))
        .with_state(state)
}

/// An existing `snapshot` is loaded and every ingestion is written back to it.
pub fn state_with_snapshot(engine: Engine, snapshot: Option<PathBuf>) -> anyhow::Result<Arc<AppState>> {
    let memory = match &snapshot {
        Some(p) if p.exists() => read_snapshot(p)?,
        _ => LongTermMemory::new(),
    };
    Ok(Arc::new(AppState::new(engine, memory, snapshot)))
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub fn run_blocking(cfg: &AppConfig, snapshot: Option<PathBuf>) -> Result<(), Failure> {
    let addr: SocketAddr = cfg.serve.bind.parse().map_err(|_| Failure::usage(format!("bad bind address {:?}", cfg.serve.bind)))?;
    let engine = Engine::from_config(cfg).map_err(|e| Failure::usage(format!("{e:#}")))?;
    let state = state_with_snapshot(engine, snapshot)?;
    let rt = tokio::runtime::Runtime::new().map_err(anyhow::Error::new)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| anyhow::anyhow!("binding {addr}: {e}"))?;
        let local = listener.local_addr().map_err(anyhow::Error::new)?;
        println!("listening on http://{local}");
        serve(listener, state).await.map_err(anyhow::Error::new)?;
        Ok::<(), anyhow::Error>(())
    })?;
    Ok(())
}
