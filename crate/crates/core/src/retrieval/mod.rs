//! Query → plan → candidates → rerank → adaptive stop → answer.

mod candidates;
mod context;
mod plan;
mod rerank;
mod stop;

pub use candidates::{description_embeddings, gather_candidates, matched_nodes};
pub use context::{answer_context, render_hyperedge};
pub use plan::{generate_plan, mock_plan, parse_plan};
pub use rerank::{compute_query_terms, rerank, rerank_with, salience_term, softmax, QueryTerms, RerankConfig};
pub use stop::{adaptive_stop, replay, StopPolicyConfig, StopTrace, TraceEntry};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, Embedder, Embedding};
use crate::llm::{Backend, LlmError, TokenUsage};
use crate::model::{LongTermMemory, QueryType, RetrievalPlan, ScoredCandidate};
use crate::prompts;

pub const NOT_MENTIONED: &str = "Not mentioned in the conversation";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("query analysis: {0}")]
    Plan(LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("answer generation: {0}")]
    Answer(LlmError),
}

/// How the final context is chosen from the reranked list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Query-type specific stopping.
    Adaptive,
    /// Fixed top-k, the baseline.
    TopK(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub stop: StopPolicyConfig,
    pub rerank: RerankConfig,
    pub selection: Selection,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { stop: StopPolicyConfig::default(), rerank: RerankConfig::default(), selection: Selection::Adaptive }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.stop.validate()?;
        self.rerank.validate()?;
        if self.selection == Selection::TopK(0) {
            return Err("top-k selection needs k >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub plan: RetrievalPlan,
    pub query_terms: QueryTerms,
    pub ranked: Vec<ScoredCandidate>,
    pub selected: Vec<String>,
    pub stop_trace: StopTrace,
    pub context: String,
    /// Set when the memory is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub usage: TokenUsage,
}

/// Precomputed description embeddings for one memory snapshot.
pub struct Index<'a> {
    pub memory: &'a LongTermMemory,
    pub embedder: &'a dyn Embedder,
    descriptions: HashMap<String, Embedding>,
}

impl<'a> Index<'a> {
    pub fn build(memory: &'a LongTermMemory, embedder: &'a dyn Embedder) -> Result<Self, EmbedError> {
        let descriptions = description_embeddings(memory, embedder)?;
        Ok(Index { memory, embedder, descriptions })
    }
}

/// Run the retrieval pipeline for one query.
pub fn retrieve(
    query: &str,
    index: &Index<'_>,
    backend: &Backend,
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult, RetrievalError> {
    let (plan, usage) = generate_plan(query, backend)?;
    retrieve_with_plan(query, plan, usage, index, cfg)
}

pub fn retrieve_with_plan(
    query: &str,
    plan: RetrievalPlan,
    usage: TokenUsage,
    index: &Index<'_>,
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult, RetrievalError> {
    let memory = index.memory;
    let q = index.embedder.embed(query)?;
    let cands = gather_candidates(memory, &plan, &q, &index.descriptions, cfg.stop.max_candidates)?;
    let terms = if memory.common_topics.is_empty() && memory.rare_topics.is_empty() {
        QueryTerms::empty()
    } else {
        compute_query_terms(&q, memory, index.embedder, &cfg.rerank)?
    };
    let ranked = if cfg.rerank.per_candidate_topic {
        let mut gaps = HashMap::new();
        for c in &cands {
            let g = match index.descriptions.get(&c.hyperedge_id) {
                Some(e) => terms.gap(e)?,
                None => 0.0,
            };
            gaps.insert(c.hyperedge_id.clone(), cfg.rerank.gamma * g);
        }
        rerank_with(cands, &plan, memory, cfg.rerank.beta, |c| gaps[&c.hyperedge_id])
    } else {
        rerank(cands, &plan, memory, &q, &terms, &cfg.rerank)?
    };
    let stop_trace = match cfg.selection {
        Selection::Adaptive => adaptive_stop(&ranked, plan.query_type, &cfg.stop),
        Selection::TopK(k) => {
            let mut t = adaptive_stop(&ranked, plan.query_type, &cfg.stop);
            for (i, e) in t.entries.iter_mut().enumerate() {
                e.selected = i < k;
            }
            t
        }
    };
    let selected = stop_trace.selected();
    let context = answer_context(&selected, memory);
    let note = memory.hyperedges.is_empty().then(|| "memory empty".to_string());
    Ok(RetrievalResult { query: query.to_string(), plan, query_terms: terms, ranked, selected, stop_trace, context, note, usage })
}

/// Answer a query from its retrieval result.
pub fn answer(result: &RetrievalResult, memory: &LongTermMemory, backend: &Backend) -> Result<(String, TokenUsage), RetrievalError> {
    let prompt = prompts::answer(&result.context, &result.query);
    match backend {
        Backend::Mock => {
            let a = mock_answer(&result.selected, memory);
            Ok((a.clone(), TokenUsage::approx(&prompt, &a)))
        }
        Backend::Remote(client) => {
            let c = client.complete(&prompt).map_err(RetrievalError::Answer)?;
            Ok((c.content.trim().to_string(), c.usage))
        }
    }
}

/// Offline stand-in for the answer model: the description of the highest
/// ranked selected hyperedge, verbatim.
pub fn mock_answer(selected: &[String], memory: &LongTermMemory) -> String {
    selected
        .iter()
        .find_map(|id| memory.hyperedge(id))
        .map_or_else(|| NOT_MENTIONED.to_string(), |h| h.description.clone())
}

/// Query type of a plan, for reporting.
pub fn policy_name(q: QueryType) -> &'static str {
    match q {
        QueryType::Recall => "recall",
        QueryType::Precision => "precision",
        QueryType::Judgement => "judgement",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    #[test]
    fn empty_memory_gives_note_and_not_mentioned() {
        let m = LongTermMemory::new();
        let e = HashEmbedder::default();
        let idx = Index::build(&m, &e).unwrap();
        let r = retrieve("What did Caroline paint?", &idx, &Backend::Mock, &RetrievalConfig::default()).unwrap();
        assert!(r.selected.is_empty());
        assert_eq!(r.note.as_deref(), Some("memory empty"));
        assert_eq!(answer(&r, &m, &Backend::Mock).unwrap().0, NOT_MENTIONED);
    }

    #[test]
    fn empty_query_is_rejected() {
        let m = LongTermMemory::new();
        let e = HashEmbedder::default();
        let idx = Index::build(&m, &e).unwrap();
        assert!(matches!(retrieve("  ", &idx, &Backend::Mock, &RetrievalConfig::default()), Err(RetrievalError::EmptyQuery)));
    }
}
