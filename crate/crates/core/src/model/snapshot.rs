//! Canonical JSON snapshot of a [`LongTermMemory`].

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use super::{ElementKind, ElementNode, Hyperedge, LongTermMemory, NodeId, NodeTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("malformed snapshot at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid snapshot field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("unsupported snapshot schema_version {found} (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("snapshot node {id} listed under {listed} has kind {actual}")]
    MisplacedNode { id: NodeId, listed: ElementKind, actual: ElementKind },
}

#[derive(Serialize)]
struct NodesOut<'a> {
    person: Vec<&'a ElementNode>,
    time: Vec<&'a ElementNode>,
    location: Vec<&'a ElementNode>,
    topic: Vec<&'a ElementNode>,
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    schema_version: u32,
    nodes: NodesOut<'a>,
    hyperedges: &'a [Hyperedge],
    common_topics: &'a [String],
    rare_topics: &'a [String],
}

#[derive(Deserialize)]
struct NodesIn {
    #[serde(default)]
    person: Vec<ElementNode>,
    #[serde(default)]
    time: Vec<ElementNode>,
    #[serde(default)]
    location: Vec<ElementNode>,
    #[serde(default)]
    topic: Vec<ElementNode>,
}

#[derive(Deserialize)]
struct SnapshotIn {
    #[allow(dead_code)]
    schema_version: u32,
    nodes: NodesIn,
    hyperedges: Vec<Hyperedge>,
    #[serde(default)]
    common_topics: Vec<String>,
    #[serde(default)]
    rare_topics: Vec<String>,
}

/// Serialize with fixed key order, id-sorted node lists and 9-digit floats.
pub fn to_snapshot(memory: &LongTermMemory) -> String {
    let nodes = NodesOut {
        person: memory.nodes.person.values().collect(),
        time: memory.nodes.time.values().collect(),
        location: memory.nodes.location.values().collect(),
        topic: memory.nodes.topic.values().collect(),
    };
    let out = SnapshotOut {
        schema_version: memory.schema_version,
        nodes,
        hyperedges: &memory.hyperedges,
        common_topics: &memory.common_topics,
        rare_topics: &memory.rare_topics,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("snapshot serialization is infallible");
    s.push('\n');
    s
}

pub fn from_snapshot(text: &str) -> Result<LongTermMemory, SnapshotError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SnapshotError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(SnapshotError::Version { found: v, expected: SCHEMA_VERSION }),
        None => {
            return Err(SnapshotError::Field {
                path: "schema_version".into(),
                message: "missing or not an unsigned integer".into(),
            })
        }
    }
    let parsed: SnapshotIn = serde_path_to_error::deserialize(value).map_err(|e| SnapshotError::Field {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut nodes = NodeTable::default();
    for (listed, list) in [
        (ElementKind::Person, parsed.nodes.person),
        (ElementKind::Time, parsed.nodes.time),
        (ElementKind::Location, parsed.nodes.location),
        (ElementKind::Topic, parsed.nodes.topic),
    ] {
        let table: &mut BTreeMap<NodeId, ElementNode> = nodes.of_mut(listed);
        for node in list {
            if node.kind != listed {
                return Err(SnapshotError::MisplacedNode { id: node.id, listed, actual: node.kind });
            }
            table.insert(node.id.clone(), node);
        }
    }
    Ok(LongTermMemory {
        schema_version: SCHEMA_VERSION,
        nodes,
        hyperedges: parsed.hyperedges,
        common_topics: parsed.common_topics,
        rare_topics: parsed.rare_topics,
    })
}
