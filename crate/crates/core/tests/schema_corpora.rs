use std::fs;
use std::path::{Path, PathBuf};

use bgmem_core::eval::load_locomo;
use bgmem_core::extractor::{mock_extract, parse_extraction, Rulebook};
use bgmem_core::llm::Backend;
use bgmem_core::memory::{mock_clusters, parse_clusters, ranked_topics};
use bgmem_core::pipeline::ingest;
use bgmem_core::prompts;
use bgmem_core::retrieval::{mock_plan, parse_plan};
use serde_json::Value;

fn corpus(kind: &str, group: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/schemas").join(kind).join(group);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    assert!(files.len() >= 10, "{} has only {} files", dir.display(), files.len());
    files.into_iter().map(|p| (p.clone(), fs::read_to_string(&p).unwrap())).collect()
}

fn conforms(schema: &Value, raw: &str) -> bool {
    let v: Value = serde_json::from_str(raw).unwrap();
    jsonschema::validator_for(schema).unwrap().is_valid(&v)
}

fn split_clustering(raw: &str) -> (Vec<String>, String) {
    let v: Value = serde_json::from_str(raw).unwrap();
    let topics = v["topics"].as_array().unwrap().iter().map(|t| t.as_str().unwrap().to_string()).collect();
    (topics, v["response"].to_string())
}

#[test]
fn extraction_corpus() {
    let schema = prompts::boundary_extraction_schema();
    for (path, raw) in corpus("extraction", "valid") {
        parse_extraction(&raw).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(conforms(&schema, &raw), "{} violates the published schema", path.display());
    }
    for (path, raw) in corpus("extraction", "invalid") {
        assert!(parse_extraction(&raw).is_err(), "{} was accepted", path.display());
    }
}

#[test]
fn clustering_corpus() {
    let schema = prompts::topic_clustering_schema();
    for (path, raw) in corpus("clustering", "valid") {
        let (topics, response) = split_clustering(&raw);
        parse_clusters(&response, &topics).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(conforms(&schema, &response), "{}", path.display());
    }
    for (path, raw) in corpus("clustering", "invalid") {
        let (topics, response) = split_clustering(&raw);
        assert!(parse_clusters(&response, &topics).is_err(), "{} was accepted", path.display());
    }
}

#[test]
fn query_corpus() {
    let schema = prompts::query_analysis_schema();
    for (path, raw) in corpus("query", "valid") {
        parse_plan(&raw).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(conforms(&schema, &raw), "{}", path.display());
    }
    for (path, raw) in corpus("query", "invalid") {
        assert!(parse_plan(&raw).is_err(), "{} was accepted", path.display());
    }
}

#[test]
fn error_messages_name_the_field() {
    let raw = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/schemas/extraction/invalid/bad_granularity.json")).unwrap();
    let err = parse_extraction(&raw).unwrap_err();
    assert!(err.starts_with("times[0].granularity"), "{err}");
}

#[test]
fn mock_outputs_pass_validators_and_schemas() {
    let data = load_locomo(&bgmem_testkit::mini_corpus()).unwrap();
    let rules = Rulebook::default();
    for conv in &data.conversations {
        for s in &conv.sessions {
            let raw = serde_json::to_string(&mock_extract(s, &rules)).unwrap();
            parse_extraction(&raw).unwrap();
            assert!(conforms(&prompts::boundary_extraction_schema(), &raw), "{}", s.session_id);
        }
        let (memory, _) = ingest(&Default::default(), &conv.sessions, &Backend::Mock).unwrap();
        let labels: Vec<String> = ranked_topics(&memory).into_iter().map(|(l, _)| l).collect();
        let raw = serde_json::to_string(&mock_clusters(&memory)).unwrap();
        parse_clusters(&raw, &labels).unwrap();
        assert!(conforms(&prompts::topic_clustering_schema(), &raw));
        for q in &conv.qa {
            let raw = serde_json::to_string(&mock_plan(&q.question)).unwrap();
            parse_plan(&raw).unwrap_or_else(|e| panic!("{:?}: {e}", q.question));
            // the published schema requires `constraints`, which serializes even when empty
            assert!(conforms(&prompts::query_analysis_schema(), &raw), "{raw}");
        }
    }
}
