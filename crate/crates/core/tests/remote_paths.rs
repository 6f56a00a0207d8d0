use std::sync::Arc;

use bgmem_core::embedding::{Embedder, RemoteEmbedder};
use bgmem_core::eval::{judge_answer, load_locomo};
use bgmem_core::extractor::{extract_boundaries, mock_extract, Rulebook, Session};
use bgmem_core::llm::{Backend, BackendConfig, BackendKind, ChatClient, LlmError};
use bgmem_core::memory::cluster_topics;
use bgmem_core::pipeline::ingest;
use bgmem_core::retrieval::generate_plan;
use bgmem_testkit::http::{Reply, StubServer};
use serde_json::Value;

fn config(url: &str) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::Remote,
        endpoint: url.to_string(),
        retry_backoff_secs: 0.0,
        max_retries: 2,
        timeout_secs: 10.0,
        ..Default::default()
    }
}

fn backend(server: &StubServer) -> Backend {
    Backend::Remote(Arc::new(ChatClient::new(&config(&server.url)).unwrap()))
}

fn first_session() -> Session {
    load_locomo(&bgmem_testkit::mini_corpus()).unwrap().conversations[0].sessions[0].clone()
}

fn extraction_reply(session: &Session) -> String {
    serde_json::to_string(&mock_extract(session, &Rulebook::default())).unwrap()
}

#[test]
fn retried_extraction_equals_first_try_success() {
    let session = first_session();
    let good = Reply::chat(&extraction_reply(&session));
    let direct = StubServer::scripted(vec![good.clone()]);
    let flaky = StubServer::scripted(vec![Reply::new(503, "busy"), Reply::new(429, "slow down"), good.clone()]);
    let invalid_first = StubServer::scripted(vec![Reply::chat("{\"persons\": []}"), good]);

    let a = extract_boundaries(&session, &backend(&direct)).unwrap();
    let b = extract_boundaries(&session, &backend(&flaky)).unwrap();
    let c = extract_boundaries(&session, &backend(&invalid_first)).unwrap();
    assert_eq!(a.memory, b.memory);
    assert_eq!(a.memory, c.memory);
    assert_eq!(flaky.requests().len(), 3);
    assert_eq!(invalid_first.requests().len(), 2);
    // usage is summed over the schema retries
    assert_eq!(c.usage.total(), 2 * a.usage.total());

    let mock = extract_boundaries(&session, &Backend::Mock).unwrap();
    assert_eq!(a.memory, mock.memory);
}

#[test]
fn requests_carry_model_schema_and_prompt() {
    let session = first_session();
    let server = StubServer::scripted(vec![Reply::chat(&extraction_reply(&session))]);
    extract_boundaries(&session, &backend(&server)).unwrap();
    let req = &server.requests()[0];
    assert_eq!(req.path, "/v1/chat/completions");
    let body: Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["response_format"]["type"], "json_schema");
    assert_eq!(body["response_format"]["json_schema"]["name"], "boundary_extraction");
    let prompt = body["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("[turn 5] Caroline: Later that evening at the gym"));
}

#[test]
fn rejected_response_format_falls_back_to_plain_json() {
    let session = first_session();
    let server = StubServer::scripted(vec![
        Reply::new(400, r#"{"error": {"message": "Unsupported parameter: response_format"}}"#),
        Reply::chat(&format!("```json\n{}\n```", extraction_reply(&session))),
    ]);
    let b = backend(&server);
    extract_boundaries(&session, &b).unwrap();
    extract_boundaries(&session, &b).unwrap();
    let reqs = server.requests();
    assert_eq!(reqs.len(), 3);
    for r in &reqs[1..] {
        let body: Value = serde_json::from_str(&r.body).unwrap();
        assert!(body.get("response_format").is_none());
    }
}

#[test]
fn persistent_failures_surface_with_attempt_counts() {
    let session = first_session();
    let server = StubServer::scripted(vec![Reply::new(500, "down")]);
    let err = extract_boundaries(&session, &backend(&server)).unwrap_err().to_string();
    assert!(err.contains("HTTP 500 after 3 attempt(s)"), "{err}");
    assert!(err.contains("session_1"), "{err}");

    let server = StubServer::scripted(vec![Reply::new(401, "bad key")]);
    let err = extract_boundaries(&session, &backend(&server)).unwrap_err().to_string();
    assert!(err.contains("HTTP 401 after 1 attempt(s)"), "{err}");
    assert_eq!(server.requests().len(), 1);

    let server = StubServer::scripted(vec![Reply::chat("not json at all")]);
    let err = extract_boundaries(&session, &backend(&server)).unwrap_err().to_string();
    assert!(err.contains("failed validation after 3 attempt(s)"), "{err}");
}

#[test]
fn missing_api_key_is_reported_for_remote_hosts() {
    let cfg = BackendConfig { api_key_env: "BGMEM_TEST_UNSET_KEY".into(), ..config("https://llm.example.com/v1") };
    assert!(matches!(ChatClient::new(&cfg), Err(LlmError::MissingApiKey(k)) if k == "BGMEM_TEST_UNSET_KEY"));
}

#[test]
fn plan_judge_and_clusters_over_the_wire() {
    let plan = r#"{"query_type": "precision", "constraints": {"person": ["Caroline"], "location": ["KFC"]}, "priority": ["person", "location"]}"#;
    let server = StubServer::scripted(vec![Reply::chat("{\"query_type\": \"precision\"}"), Reply::chat(plan)]);
    let (p, _) = generate_plan("When did Caroline have lunch at KFC?", &backend(&server)).unwrap();
    assert_eq!(p.constraints.location, ["KFC"]);
    assert_eq!(server.requests().len(), 2);

    let server = StubServer::scripted(vec![Reply::chat(r#"{"rationale": "same date", "label": "CORRECT"}"#)]);
    let (v, usage) = judge_answer("q", "7 May 2023", "May 7, 2023", &backend(&server)).unwrap();
    assert!(v.correct);
    assert_eq!(usage.total(), 15);

    let data = load_locomo(&bgmem_testkit::mini_corpus()).unwrap();
    let (memory, _) = ingest(&Default::default(), &data.conversations[0].sessions, &Backend::Mock).unwrap();
    let labels: Vec<String> = bgmem_core::memory::ranked_topics(&memory).into_iter().map(|(l, _)| l).collect();
    let reply = serde_json::json!({"common_topics": labels[..3], "rare_topics": labels[labels.len() - 3..]}).to_string();
    let server = StubServer::scripted(vec![Reply::chat(&reply)]);
    let (clusters, _) = cluster_topics(&memory, &backend(&server)).unwrap();
    assert_eq!(clusters.common_topics, labels[..3]);
}

#[test]
fn remote_embeddings() {
    let server = StubServer::start(|req, _| {
        let body: Value = serde_json::from_str(&req.body).unwrap();
        let n = body["input"].as_str().unwrap().len() as f64;
        if n > 20.0 {
            Reply::embedding(&[1.0, 2.0])
        } else {
            Reply::embedding(&[n, 1.0, 0.0])
        }
    });
    let e = RemoteEmbedder::new(&config(&server.url), "embed-small").unwrap();
    let v = e.embed("hello").unwrap();
    assert_eq!(v.dim(), 3);
    assert!((v.values.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(server.requests()[0].path, "/v1/embeddings");
    assert!(e.embed("a considerably longer text").is_err(), "dimension change must be rejected");
    assert!(e.embed("  ").is_err());
}
