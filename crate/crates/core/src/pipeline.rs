//! Session ingestion: extract every session, consolidate in order, then
//! re-cluster topics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extractor::{extract_boundaries, ExtractError, Session};
use crate::llm::{Backend, TokenUsage};
use crate::memory::{cluster_topics, consolidate, set_clusters, MemoryError, MemoryStats};
use crate::model::LongTermMemory;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub segments: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub sessions: Vec<SessionReport>,
    pub usage: TokenUsage,
    pub stats: MemoryStats,
}

/// Ingest `sessions` into `memory`. Extraction runs in parallel; consolidation
/// follows the input order.
pub fn ingest(memory: &LongTermMemory, sessions: &[Session], backend: &Backend) -> Result<(LongTermMemory, IngestReport), PipelineError> {
    let extractions: Vec<_> = sessions.par_iter().map(|s| extract_boundaries(s, backend)).collect();
    let mut out = memory.clone();
    let mut usage = TokenUsage::default();
    let mut reports = Vec::with_capacity(sessions.len());
    for e in extractions {
        let e = e?;
        usage.add(e.usage);
        out = consolidate(&out, &e.memory)?;
        reports.push(SessionReport {
            session_id: e.memory.session_id.clone(),
            segments: e.memory.hyperedges.len(),
            warnings: e.warnings,
        });
    }
    if !out.nodes.topic.is_empty() {
        let (clusters, u) = cluster_topics(&out, backend)?;
        usage.add(u);
        set_clusters(&mut out, clusters);
    }
    let stats = MemoryStats::of(&out);
    Ok((out, IngestReport { sessions: reports, usage, stats }))
}
