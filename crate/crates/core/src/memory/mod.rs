//! Consolidation of per-session boundary memories into the long-term memory.

mod merge;
mod salience;
mod stats;
mod topics;

pub use merge::{jaccard, merge_fixpoint, merge_pair, MERGE_THRESHOLD};
pub use salience::{apply_salience, compute_salience, SalienceBreakdown, SalienceWeights};
pub use stats::{ConstructionStats, MemoryStats};
pub use topics::{cluster_size, cluster_topics, mock_clusters, parse_clusters, ranked_topics, TopicClusters};

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::llm::LlmError;
use crate::model::time::normalize_timestamp;
use crate::model::{
    validate_boundary_memory, validate_memory, BoundaryMemory, ElementKind, ElementNode, LongTermMemory, NodeId,
    Span, TimeGranularity, Violation,
};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("invalid {what}: {}", join(.violations))]
    Invalid { what: &'static str, violations: Vec<Violation> },
    #[error("time node {id}: {raw:?} is not an ISO-8601 timestamp")]
    Time { id: String, raw: String },
    #[error("memory has no topic nodes to cluster")]
    NoTopics,
    #[error("topic clustering failed: {0}")]
    Clustering(LlmError),
}

fn join(vs: &[Violation]) -> String {
    let mut parts: Vec<String> = vs.iter().take(5).map(ToString::to_string).collect();
    if vs.len() > 5 {
        parts.push(format!("and {} more", vs.len() - 5));
    }
    parts.join("; ")
}

/// Rename time nodes to their canonical ISO-8601 form and rewrite the
/// hyperedge references. Two time nodes that collapse to one name keep the
/// exact granularity over `approx`.
fn normalize_times(incoming: &BoundaryMemory) -> Result<BoundaryMemory, MemoryError> {
    let mut out = incoming.clone();
    let mut remap: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut nodes: Vec<ElementNode> = Vec::with_capacity(out.nodes.len());
    for node in out.nodes.drain(..) {
        let node = if node.kind == ElementKind::Time {
            let g = node.granularity.unwrap_or(TimeGranularity::Approx);
            let name = normalize_timestamp(&node.name, g)
                .ok_or_else(|| MemoryError::Time { id: node.id.to_string(), raw: node.name.clone() })?;
            let mut renamed = ElementNode::time(name, g);
            renamed.mentions = node.mentions;
            renamed.salience = node.salience;
            remap.insert(node.id, renamed.id.clone());
            renamed
        } else {
            node
        };
        match nodes.iter_mut().find(|n| n.id == node.id) {
            Some(existing) => absorb(existing, node),
            None => nodes.push(node),
        }
    }
    out.nodes = nodes;
    for h in &mut out.hyperedges {
        h.times = h.times.iter().map(|id| remap.get(id).unwrap_or(id).clone()).collect();
    }
    Ok(out)
}

/// Fold `other` into `node`: mentions are appended with deduplication and an
/// exact granularity replaces `approx`.
fn absorb(node: &mut ElementNode, other: ElementNode) {
    for m in other.mentions {
        node.add_mention(m);
    }
    if node.granularity == Some(TimeGranularity::Approx) && other.granularity.is_some_and(|g| !g.is_approx()) {
        node.granularity = other.granularity;
    }
}

/// Consolidate with the default salience weights.
pub fn consolidate(memory: &LongTermMemory, incoming: &BoundaryMemory) -> Result<LongTermMemory, MemoryError> {
    consolidate_with(memory, incoming, &SalienceWeights::default())
}

/// Unify nodes by id, append the new hyperedges, re-establish the merge
/// fixpoint and recompute salience. Hyperedges whose spans are all already
/// present in `memory` are skipped, so re-ingesting a session is a no-op.
/// Topic clusters are carried over unchanged.
pub fn consolidate_with(
    memory: &LongTermMemory,
    incoming: &BoundaryMemory,
    weights: &SalienceWeights,
) -> Result<LongTermMemory, MemoryError> {
    let violations = validate_memory(memory);
    if !violations.is_empty() {
        return Err(MemoryError::Invalid { what: "memory", violations });
    }
    let incoming = normalize_times(incoming)?;
    let violations = validate_boundary_memory(&incoming);
    if !violations.is_empty() {
        return Err(MemoryError::Invalid { what: "boundary memory", violations });
    }

    let mut out = memory.clone();
    for node in incoming.nodes {
        match out.nodes.of_mut(node.kind).get_mut(&node.id) {
            Some(existing) => absorb(existing, node),
            None => out.nodes.insert(node),
        }
    }
    let known: BTreeSet<&Span> = memory.hyperedges.iter().flat_map(|h| &h.provenance).collect();
    let fresh: Vec<_> = incoming
        .hyperedges
        .into_iter()
        .filter(|h| {
            let seen = h.provenance.iter().all(|s| known.contains(s));
            if seen {
                log::info!("skipping already ingested segment {}", h.id);
            }
            !seen
        })
        .collect();
    let mut hyperedges = out.hyperedges;
    hyperedges.extend(fresh);
    out.hyperedges = merge_fixpoint(hyperedges);
    apply_salience(&mut out, weights);

    let violations = validate_memory(&out);
    if !violations.is_empty() {
        return Err(MemoryError::Invalid { what: "consolidated memory", violations });
    }
    Ok(out)
}

/// Replace the topic clusters of `memory`.
pub fn set_clusters(memory: &mut LongTermMemory, clusters: TopicClusters) {
    memory.common_topics = clusters.common_topics;
    memory.rare_topics = clusters.rare_topics;
}
