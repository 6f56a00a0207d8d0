//! Backend, embedder and retrieval settings bundled for the front ends.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use bgmem_core::embedding::{build_embedder, Embedder};
use bgmem_core::eval::parse_locomo;
use bgmem_core::extractor::Session;
use bgmem_core::llm::{Backend, TokenUsage};
use bgmem_core::model::{from_snapshot, to_snapshot, LongTermMemory};
use bgmem_core::pipeline::{ingest, IngestReport, PipelineError};
use bgmem_core::retrieval::{answer, retrieve, Index, RetrievalConfig, RetrievalError, RetrievalResult};
use serde::{Deserialize, Serialize};

use crate::config::AppConfig;

pub struct Engine {
    pub backend: Backend,
    pub embedder: Arc<dyn Embedder>,
    pub retrieval: RetrievalConfig,
}

/// A retrieval result with the generated answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answered {
    pub answer: String,
    #[serde(flatten)]
    pub result: RetrievalResult,
    pub answer_usage: TokenUsage,
}

impl Engine {
    pub fn from_config(cfg: &AppConfig) -> anyhow::Result<Engine> {
        let backend = Backend::from_config(&cfg.llm, cfg.paths.trace_dir.clone()).context("LLM backend")?;
        let embedder =
            build_embedder(&cfg.embedding, &cfg.llm, cfg.paths.cache_dir.clone()).context("embedding provider")?;
        Ok(Engine { backend, embedder, retrieval: cfg.retrieval() })
    }

    pub fn query(&self, memory: &LongTermMemory, question: &str) -> Result<Answered, RetrievalError> {
        let index = Index::build(memory, self.embedder.as_ref())?;
        let result = retrieve(question, &index, &self.backend, &self.retrieval)?;
        let (answer, answer_usage) = answer(&result, memory, &self.backend)?;
        Ok(Answered { answer, result, answer_usage })
    }

    pub fn ingest(&self, memory: &LongTermMemory, sessions: &[Session]) -> Result<(LongTermMemory, IngestReport), PipelineError> {
        ingest(memory, sessions, &self.backend)
    }
}

pub fn read_snapshot(path: &Path) -> anyhow::Result<LongTermMemory> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading snapshot {}", path.display()))?;
    from_snapshot(&text).with_context(|| format!("snapshot {}", path.display()))
}

/// Write through a temporary file and rename, so readers never see a partial snapshot.
pub fn write_snapshot(path: &Path, memory: &LongTermMemory) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, to_snapshot(memory)).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// One conversation to ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub sessions: Vec<Session>,
}

/// Accepts a benchmark file (array of conversations), an array of sessions,
/// or a single session. Bare session input takes its id from the file stem.
pub fn load_conversations(path: &Path) -> anyhow::Result<Vec<Conversation>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    let stem = path.file_stem().map_or_else(|| "conversation".to_string(), |s| s.to_string_lossy().into_owned());
    let first = match &value {
        serde_json::Value::Array(a) => a.first(),
        v => Some(v),
    };
    let Some(first) = first else {
        bail!("{} holds no conversations or sessions", path.display());
    };
    if first.get("conversation").is_some() {
        let d = parse_locomo(&text).with_context(|| path.display().to_string())?;
        return Ok(d.conversations.into_iter().map(|c| Conversation { id: c.id, sessions: c.sessions }).collect());
    }
    let sessions: Vec<Session> = if value.is_array() {
        serde_path_to_error::deserialize(value).map_err(|e| anyhow::anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))?
    } else {
        vec![serde_path_to_error::deserialize(value).map_err(|e| anyhow::anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))?]
    };
    for s in &sessions {
        s.validate()?;
    }
    Ok(vec![Conversation { id: stem, sessions }])
}

/// Snapshot file of a conversation under `dir`.
pub fn snapshot_path(dir: &Path, conversation: &str) -> PathBuf {
    let safe: String = conversation
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    dir.join(format!("{safe}.json"))
}
