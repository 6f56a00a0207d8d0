use std::process::Command;
use std::sync::Arc;

use bgmem_cli::config::AppConfig;
use bgmem_cli::engine::{Answered, Engine};
use bgmem_cli::serve::{router, AppState, QueryResponse, SessionResponse};
use bgmem_core::eval::load_locomo;
use bgmem_core::llm::BackendKind;
use bgmem_core::model::LongTermMemory;
use bgmem_testkit::http::{Reply, StubServer};
use bgmem_testkit::mini_corpus;
use serde_json::{json, Value};

fn start(state: Arc<AppState>) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(l.local_addr().unwrap()).unwrap();
            axum::serve(l, router(state)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn mock_state() -> Arc<AppState> {
    let engine = Engine::from_config(&AppConfig::default()).unwrap();
    Arc::new(AppState::new(engine, LongTermMemory::new(), None))
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn post(base: &str, path: &str, body: &str) -> (u16, String) {
    let mut r = agent().post(&format!("{base}{path}")).header("content-type", "application/json").send(body).unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

fn get(base: &str, path: &str) -> (u16, String) {
    let mut r = agent().get(&format!("{base}{path}")).call().unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

#[test]
fn query_on_empty_memory() {
    let base = start(mock_state());
    let (status, body) = get(&base, "/health");
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["hyperedges"], 0);
    let (status, body) = post(&base, "/query", r#"{"query": "What did Melanie paint?"}"#);
    assert_eq!(status, 200, "{body}");
    let r: QueryResponse = serde_json::from_str(&body).unwrap();
    assert!(r.selected.is_empty());
    assert_eq!(r.note.as_deref(), Some("memory empty"));
    assert_eq!(r.answer, bgmem_core::retrieval::NOT_MENTIONED);
}

#[test]
fn sessions_then_queries_match_the_cli() {
    let dataset = load_locomo(&mini_corpus()).unwrap();
    let conv = &dataset.conversations[0];
    let base = start(mock_state());
    for s in &conv.sessions {
        let (status, body) = post(&base, "/sessions", &serde_json::to_string(s).unwrap());
        assert_eq!(status, 200, "{body}");
        let r: SessionResponse = serde_json::from_str(&body).unwrap();
        assert_eq!(r.session.session_id, s.session_id);
    }

    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bgmem");
    let corpus = mini_corpus();
    let st = Command::new(bin)
        .args(["ingest", corpus.to_str().unwrap(), "--conversation", "conv-1", "--snapshot", "c1.json"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(st.status.success());
    let cli_snapshot = std::fs::read_to_string(dir.path().join("c1.json")).unwrap();
    let (status, served) = get(&base, "/snapshot");
    assert_eq!(status, 200);
    assert_eq!(served, cli_snapshot);

    for q in &conv.qa {
        let out = Command::new(bin)
            .args(["query", "--snapshot", "c1.json", "--explain", &q.question])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        let cli: Answered = serde_json::from_slice(&out.stdout).unwrap();
        let (status, body) = post(&base, "/query", &json!({ "query": q.question }).to_string());
        assert_eq!(status, 200, "{body}");
        let srv: QueryResponse = serde_json::from_str(&body).unwrap();
        assert_eq!(srv.answer, cli.answer, "{}", q.question);
        assert_eq!(srv.selected, cli.result.selected);
        assert_eq!(srv.trace, cli.result.stop_trace);
        assert_eq!(srv.plan, cli.result.plan);
    }
}

#[test]
fn bad_bodies_are_rejected_with_a_path() {
    let base = start(mock_state());
    let (status, body) = post(&base, "/query", "{");
    assert_eq!(status, 400);
    assert!(serde_json::from_str::<Value>(&body).unwrap()["error"].is_string());

    let (status, body) = post(&base, "/query", r#"{"query": 5}"#);
    assert_eq!(status, 400);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["path"], "query");

    let (status, _) = post(&base, "/query", r#"{"query": "x", "k": 3}"#);
    assert_eq!(status, 400);
    let (status, _) = post(&base, "/query", r#"{"query": "  "}"#);
    assert_eq!(status, 400);

    let session = json!({"session_id": "s1", "session_datetime": "2023-05-08T13:56:00",
        "turns": [{"turn": 1, "speaker": "A", "text": "hi"}, {"turn": 2, "text": "no speaker"}]});
    let (status, body) = post(&base, "/sessions", &session.to_string());
    assert_eq!(status, 400);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["path"], "turns[1]", "{v}");
    assert!(v["error"].as_str().unwrap().contains("speaker"));

    let session = json!({"session_id": "s1", "session_datetime": "2023-05-08T13:56:00",
        "turns": [{"turn": 2, "speaker": "A", "text": "hi"}]});
    let (status, body) = post(&base, "/sessions", &session.to_string());
    assert_eq!(status, 400);
    assert!(body.contains("numbered"), "{body}");

    let (status, _) = get(&base, "/nowhere");
    assert_eq!(status, 404);
}

#[test]
fn second_writer_gets_conflict() {
    let state = mock_state();
    let base = start(state.clone());
    let session = json!({"session_id": "s1", "session_datetime": "2023-05-08T13:56:00",
        "turns": [{"turn": 1, "speaker": "Caroline", "text": "I joined a tennis club in Boston."}]})
    .to_string();
    let guard = state.writer().try_lock().unwrap();
    let (status, _) = post(&base, "/sessions", &session);
    assert_eq!(status, 409);
    // readers are not blocked by the writer
    let (status, _) = post(&base, "/query", r#"{"query": "Where is the tennis club?"}"#);
    assert_eq!(status, 200);
    drop(guard);
    let (status, body) = post(&base, "/sessions", &session);
    assert_eq!(status, 200, "{body}");
    assert_eq!(state.current().hyperedges.len(), 1);
}

#[test]
fn backend_faults_return_an_opaque_id() {
    let stub = StubServer::scripted(vec![Reply::new(500, "upstream exploded: secret detail")]);
    let mut cfg = AppConfig::default();
    cfg.llm.kind = BackendKind::Remote;
    cfg.llm.endpoint = stub.url.clone();
    cfg.llm.max_retries = 0;
    let engine = Engine::from_config(&cfg).unwrap();
    let base = start(Arc::new(AppState::new(engine, LongTermMemory::new(), None)));
    let (status, body) = post(&base, "/query", r#"{"query": "What did Melanie paint?"}"#);
    assert_eq!(status, 500);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v["id"].as_str().unwrap().starts_with("fault-"));
    assert_eq!(v.as_object().unwrap().len(), 2);
    assert!(!body.contains("secret"));
}

#[test]
fn persisted_snapshot_follows_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("live.json");
    let engine = Engine::from_config(&AppConfig::default()).unwrap();
    let state = bgmem_cli::serve::state_with_snapshot(engine, Some(path.clone())).unwrap();
    let base = start(state);
    let session = json!({"session_id": "s1", "session_datetime": "2023-05-08T13:56:00",
        "turns": [{"turn": 1, "speaker": "Caroline", "text": "I joined a tennis club in Boston."}]});
    assert_eq!(post(&base, "/sessions", &session.to_string()).0, 200);
    let (_, served) = get(&base, "/snapshot");
    assert_eq!(std::fs::read_to_string(&path).unwrap(), served);

    let engine = Engine::from_config(&AppConfig::default()).unwrap();
    let reloaded = bgmem_cli::serve::state_with_snapshot(engine, Some(path)).unwrap();
    assert_eq!(reloaded.current().hyperedges.len(), 1);
}
