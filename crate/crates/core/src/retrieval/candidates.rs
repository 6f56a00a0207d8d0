//! Structural and semantic candidate gathering.

use std::collections::{BTreeSet, HashMap};

use crate::embedding::{similarity, EmbedError, Embedder, Embedding};
use crate::model::time::overlaps;
use crate::model::{canonical_name, ElementKind, LongTermMemory, NodeId, RetrievalPlan, ScoredCandidate};

/// Name match: canonical equality, or containment either way when the
/// contained name has at least three characters.
fn names_match(node: &str, constraint: &str) -> bool {
    let (n, c) = (node, canonical_name(constraint));
    if c.is_empty() {
        return false;
    }
    n == c || (c.chars().count() >= 3 && n.contains(&c)) || (n.chars().count() >= 3 && c.contains(n))
}

/// Nodes matched by the plan's constraints.
pub fn matched_nodes(memory: &LongTermMemory, plan: &RetrievalPlan) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let c = &plan.constraints;
    for (kind, list) in [(ElementKind::Person, &c.person), (ElementKind::Location, &c.location), (ElementKind::Topic, &c.topic)] {
        for node in memory.nodes.of(kind).values() {
            if list.iter().any(|x| names_match(node.id.canonical(), x)) {
                out.insert(node.id.clone());
            }
        }
    }
    for node in memory.nodes.time.values() {
        let g = node.granularity.unwrap_or(crate::model::TimeGranularity::Approx);
        if c.time.iter().any(|t| overlaps((&t.timestamp, t.granularity), (&node.name, g))) {
            out.insert(node.id.clone());
        }
    }
    out
}

/// Embeddings of every hyperedge description, keyed by hyperedge id.
pub fn description_embeddings(
    memory: &LongTermMemory,
    embedder: &dyn Embedder,
) -> Result<HashMap<String, Embedding>, EmbedError> {
    memory.hyperedges.iter().map(|h| Ok((h.id.clone(), embedder.embed(&h.description)?))).collect()
}

/// Structural hits (hyperedges holding a matched node) united with the
/// `max_candidates` most similar hyperedges. Every candidate carries its
/// semantic score ξ = (1 + cos) / 2. Sorted by ξ descending, then id.
pub fn gather_candidates(
    memory: &LongTermMemory,
    plan: &RetrievalPlan,
    query: &Embedding,
    descriptions: &HashMap<String, Embedding>,
    max_candidates: usize,
) -> Result<Vec<ScoredCandidate>, EmbedError> {
    let matched = matched_nodes(memory, plan);
    let mut all = Vec::with_capacity(memory.hyperedges.len());
    for h in &memory.hyperedges {
        let xi = match descriptions.get(&h.id) {
            Some(e) => similarity(query, e)?,
            None => 0.0,
        };
        let mut c = ScoredCandidate::new(h.id.clone(), xi);
        c.structural = h.node_set().iter().any(|n| matched.contains(*n));
        all.push(c);
    }
    all.sort_by(|a, b| b.initial_score.total_cmp(&a.initial_score).then_with(|| a.hyperedge_id.cmp(&b.hyperedge_id)));
    Ok(all.into_iter().enumerate().filter(|(i, c)| *i < max_candidates || c.structural).map(|(_, c)| c).collect())
}
