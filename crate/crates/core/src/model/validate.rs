//! Invariant checks. Violations are returned as data.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::{
    BoundaryMemory, ElementKind, ElementNode, Hyperedge, LongTermMemory, NodeId, SCHEMA_VERSION,
};
use crate::memory::{jaccard, MERGE_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Type name of the offending value, e.g. `Hyperedge`.
    pub subject: &'static str,
    pub id: String,
    pub message: String,
}

impl Violation {
    fn new(subject: &'static str, id: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { subject, id: id.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.subject, self.id, self.message)
    }
}

fn check_node(node: &ElementNode, out: &mut Vec<Violation>) {
    let id = node.id.as_str();
    if node.id != NodeId::new(node.kind, &node.name) {
        out.push(Violation::new("ElementNode", id, format!("id does not derive from ({}, {:?})", node.kind, node.name)));
    }
    if node.name.trim().is_empty() {
        out.push(Violation::new("ElementNode", id, "empty name"));
    }
    if node.mentions.is_empty() {
        out.push(Violation::new("ElementNode", id, "no mentions"));
    }
    for m in &node.mentions {
        if m.turn == 0 || m.surface.is_empty() {
            out.push(Violation::new("ElementNode", id, format!("malformed mention {m:?}")));
        }
    }
    if !(0.0..=1.0).contains(&node.salience) {
        out.push(Violation::new("ElementNode", id, format!("salience {} outside [0,1]", node.salience)));
    }
    match (node.kind, node.granularity) {
        (ElementKind::Time, None) => out.push(Violation::new("ElementNode", id, "time node without granularity")),
        (ElementKind::Time, Some(g)) => {
            if g.parse(&node.name).is_none() {
                out.push(Violation::new("ElementNode", id, format!("name {:?} is not ISO-8601 at {g} granularity", node.name)));
            }
        }
        (_, Some(_)) => out.push(Violation::new("ElementNode", id, "granularity on a non-time node")),
        (_, None) => {}
    }
}

fn check_hyperedge(h: &Hyperedge, resolve: &dyn Fn(&NodeId) -> Option<ElementKind>, out: &mut Vec<Violation>) {
    let id = h.id.as_str();
    if h.topics.is_empty() {
        out.push(Violation::new("Hyperedge", id, "no topic"));
    }
    if h.description.trim().is_empty() {
        out.push(Violation::new("Hyperedge", id, "empty description"));
    }
    if h.reasons.is_empty() {
        out.push(Violation::new("Hyperedge", id, "no boundary reason"));
    }
    if h.provenance.is_empty() {
        out.push(Violation::new("Hyperedge", id, "no provenance"));
    }
    for s in &h.provenance {
        if s.start_turn == 0 || s.start_turn > s.end_turn {
            out.push(Violation::new("Hyperedge", id, format!("bad provenance span {s}")));
        }
    }
    for kind in ElementKind::ALL {
        for nid in h.nodes_of(kind) {
            match resolve(nid) {
                None => out.push(Violation::new("Hyperedge", id, format!("unresolved {} id {}", kind.title(), nid))),
                Some(k) if k != kind => out.push(Violation::new(
                    "Hyperedge",
                    id,
                    format!("{} slot references {} node {}", kind.title(), k.title(), nid),
                )),
                Some(_) => {}
            }
        }
    }
}

/// Every invariant of a consolidated memory; empty iff the memory is valid.
pub fn validate_memory(memory: &LongTermMemory) -> Vec<Violation> {
    let mut out = Vec::new();
    if memory.schema_version != SCHEMA_VERSION {
        out.push(Violation::new("LongTermMemory", "schema", format!("schema_version {}", memory.schema_version)));
    }
    for kind in ElementKind::ALL {
        for (key, node) in memory.nodes.of(kind) {
            if key != &node.id {
                out.push(Violation::new("ElementNode", node.id.as_str(), format!("stored under key {key}")));
            }
            if node.kind != kind {
                out.push(Violation::new("ElementNode", node.id.as_str(), format!("listed as {kind}")));
            }
            check_node(node, &mut out);
        }
    }
    let resolve = |id: &NodeId| memory.nodes.get(id).map(|n| n.kind);
    let mut ids = HashSet::new();
    for h in &memory.hyperedges {
        if !ids.insert(h.id.as_str()) {
            out.push(Violation::new("Hyperedge", h.id.as_str(), "duplicate id"));
        }
        check_hyperedge(h, &resolve, &mut out);
    }
    for (i, a) in memory.hyperedges.iter().enumerate() {
        for b in &memory.hyperedges[i + 1..] {
            let j = jaccard(a, b);
            if j > MERGE_THRESHOLD {
                out.push(Violation::new(
                    "LongTermMemory",
                    "merge",
                    format!("hyperedges {} and {} have Jaccard {j:.3} > {MERGE_THRESHOLD}", a.id, b.id),
                ));
            }
        }
    }
    let labels: BTreeSet<&str> = memory.nodes.topic.values().map(|n| n.name.as_str()).collect();
    for (side, list) in [("common", &memory.common_topics), ("rare", &memory.rare_topics)] {
        for t in list {
            if !labels.contains(t.as_str()) {
                out.push(Violation::new("LongTermMemory", "topics", format!("{side} topic {t:?} is not a topic label")));
            }
        }
    }
    for t in &memory.common_topics {
        if memory.rare_topics.contains(t) {
            out.push(Violation::new("LongTermMemory", "topics", format!("topic {t:?} is both common and rare")));
        }
    }
    out
}

/// Conditions that are permitted but worth reporting, such as segments
/// without any person.
pub fn memory_warnings(memory: &LongTermMemory) -> Vec<Violation> {
    memory
        .hyperedges
        .iter()
        .filter(|h| h.persons.is_empty())
        .map(|h| Violation::new("Hyperedge", h.id.as_str(), "no person (monologue segment)"))
        .collect()
}

pub fn validate_boundary_memory(b: &BoundaryMemory) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut kinds = std::collections::HashMap::new();
    for node in &b.nodes {
        if kinds.insert(node.id.clone(), node.kind).is_some() {
            out.push(Violation::new("ElementNode", node.id.as_str(), "declared twice"));
        }
        check_node(node, &mut out);
    }
    let resolve = |id: &NodeId| kinds.get(id).copied();
    for h in &b.hyperedges {
        check_hyperedge(h, &resolve, &mut out);
        for s in &h.provenance {
            if s.session_id != b.session_id {
                out.push(Violation::new("Hyperedge", h.id.as_str(), format!("span {s} from another session")));
            }
        }
    }
    out
}
