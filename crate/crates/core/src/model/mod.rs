//! Shared domain types: element nodes, hyperedges, boundary memories and the
//! consolidated long-term memory.

mod snapshot;
pub mod time;
mod validate;

pub use snapshot::{from_snapshot, to_snapshot, SnapshotError, SCHEMA_VERSION};
pub use time::TimeGranularity;
pub use validate::{validate_boundary_memory, validate_memory, memory_warnings, Violation};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use unicode_normalization::UnicodeNormalization;

use crate::fmt::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Person,
    Time,
    Location,
    Topic,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] =
        [ElementKind::Person, ElementKind::Time, ElementKind::Location, ElementKind::Topic];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Person => "person",
            ElementKind::Time => "time",
            ElementKind::Location => "location",
            ElementKind::Topic => "topic",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ElementKind::Person => "Person",
            ElementKind::Time => "Time",
            ElementKind::Location => "Location",
            ElementKind::Topic => "Topic",
        }
    }

    pub fn parse(s: &str) -> Option<ElementKind> {
        ElementKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lowercased, whitespace-collapsed, NFC-normalized form of a name.
pub fn canonical_name(name: &str) -> String {
    let nfc: String = name.nfc().collect();
    nfc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Node identifier: `<kind>:<canonical name>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(kind: ElementKind, name: &str) -> Self {
        NodeId(format!("{}:{}", kind.as_str(), canonical_name(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> Option<ElementKind> {
        self.0.split_once(':').and_then(|(k, _)| ElementKind::parse(k))
    }

    /// The canonical-name part of the id.
    pub fn canonical(&self) -> &str {
        self.0.split_once(':').map_or(self.0.as_str(), |(_, n)| n)
    }

    /// Wrap an arbitrary string, for fixtures and for parsing foreign data.
    pub fn from_raw(raw: impl Into<String>) -> Self {
        NodeId(raw.into())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub session_id: String,
    pub turn: u32,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementNode {
    pub id: NodeId,
    pub kind: ElementKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<TimeGranularity>,
    pub mentions: Vec<Mention>,
    #[serde(serialize_with = "sig9")]
    pub salience: f64,
}

impl ElementNode {
    pub fn new(kind: ElementKind, name: impl Into<String>) -> Self {
        let name = name.into();
        ElementNode {
            id: NodeId::new(kind, &name),
            kind,
            name,
            granularity: None,
            mentions: Vec::new(),
            salience: 0.0,
        }
    }

    pub fn time(name: impl Into<String>, granularity: TimeGranularity) -> Self {
        let mut n = ElementNode::new(ElementKind::Time, name);
        n.granularity = Some(granularity);
        n
    }

    pub fn with_mention(mut self, session_id: &str, turn: u32, surface: &str) -> Self {
        self.add_mention(Mention { session_id: session_id.into(), turn, surface: surface.into() });
        self
    }

    /// Append a mention unless an identical one is already present.
    pub fn add_mention(&mut self, m: Mention) {
        if !self.mentions.contains(&m) {
            self.mentions.push(m);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryReason {
    #[serde(rename = "change_person")]
    ChangePerson,
    #[serde(rename = "change_time")]
    ChangeTime,
    #[serde(rename = "change_location", alias = "change_place")]
    ChangeLocation,
    #[serde(rename = "topic_shift")]
    TopicShift,
    #[serde(rename = "explicit_marker")]
    ExplicitMarker,
}

impl BoundaryReason {
    pub const ALL: [BoundaryReason; 5] = [
        BoundaryReason::ChangePerson,
        BoundaryReason::ChangeTime,
        BoundaryReason::ChangeLocation,
        BoundaryReason::TopicShift,
        BoundaryReason::ExplicitMarker,
    ];
}

/// A contiguous turn range of one session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub session_id: String,
    pub start_turn: u32,
    pub end_turn: u32,
}

impl Span {
    pub fn new(session_id: impl Into<String>, start_turn: u32, end_turn: u32) -> Self {
        Span { session_id: session_id.into(), start_turn, end_turn }
    }
}

impl Ord for Span {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.session_id, &other.session_id)
            .then(self.start_turn.cmp(&other.start_turn))
            .then(self.end_turn.cmp(&other.end_turn))
    }
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.session_id, self.start_turn, self.end_turn)
    }
}

/// Compare strings so that embedded digit runs order numerically
/// (`session_2` < `session_10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut digit = None;
        for (i, c) in s.char_indices() {
            let d = c.is_ascii_digit();
            if digit.is_some_and(|p| p != d) {
                out.push((digit.unwrap(), &s[start..i]));
                start = i;
            }
            digit = Some(d);
        }
        if let Some(d) = digit {
            out.push((d, &s[start..]));
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(cb.iter()) {
        let ord = if *da && *db {
            let (ta, tb) = (sa.trim_start_matches('0'), sb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            sa.cmp(sb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: String,
    pub persons: BTreeSet<NodeId>,
    pub times: BTreeSet<NodeId>,
    pub locations: BTreeSet<NodeId>,
    pub topics: BTreeSet<NodeId>,
    pub description: String,
    pub reasons: Vec<BoundaryReason>,
    pub provenance: Vec<Span>,
}

impl Hyperedge {
    /// Deterministic id from the (sorted) provenance spans.
    pub fn derive_id(provenance: &[Span]) -> String {
        let mut spans = provenance.to_vec();
        spans.sort();
        let mut h = Sha256::new();
        for s in &spans {
            h.update(s.to_string().as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("h-{hex}")
    }

    pub fn nodes_of(&self, kind: ElementKind) -> &BTreeSet<NodeId> {
        match kind {
            ElementKind::Person => &self.persons,
            ElementKind::Time => &self.times,
            ElementKind::Location => &self.locations,
            ElementKind::Topic => &self.topics,
        }
    }

    pub fn nodes_of_mut(&mut self, kind: ElementKind) -> &mut BTreeSet<NodeId> {
        match kind {
            ElementKind::Person => &mut self.persons,
            ElementKind::Time => &mut self.times,
            ElementKind::Location => &mut self.locations,
            ElementKind::Topic => &mut self.topics,
        }
    }

    /// Union of the four element-id sets.
    pub fn node_set(&self) -> BTreeSet<&NodeId> {
        self.persons
            .iter()
            .chain(&self.times)
            .chain(&self.locations)
            .chain(&self.topics)
            .collect()
    }

    pub fn first_span(&self) -> Option<&Span> {
        self.provenance.iter().min()
    }
}

/// Output of boundary extraction for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMemory {
    pub session_id: String,
    pub nodes: Vec<ElementNode>,
    pub hyperedges: Vec<Hyperedge>,
}

/// Nodes of a long-term memory, one map per element kind, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeTable {
    pub person: BTreeMap<NodeId, ElementNode>,
    pub time: BTreeMap<NodeId, ElementNode>,
    pub location: BTreeMap<NodeId, ElementNode>,
    pub topic: BTreeMap<NodeId, ElementNode>,
}

impl NodeTable {
    pub fn of(&self, kind: ElementKind) -> &BTreeMap<NodeId, ElementNode> {
        match kind {
            ElementKind::Person => &self.person,
            ElementKind::Time => &self.time,
            ElementKind::Location => &self.location,
            ElementKind::Topic => &self.topic,
        }
    }

    pub fn of_mut(&mut self, kind: ElementKind) -> &mut BTreeMap<NodeId, ElementNode> {
        match kind {
            ElementKind::Person => &mut self.person,
            ElementKind::Time => &mut self.time,
            ElementKind::Location => &mut self.location,
            ElementKind::Topic => &mut self.topic,
        }
    }

    pub fn get(&self, id: &NodeId) -> Option<&ElementNode> {
        self.of(id.kind()?).get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElementNode> {
        ElementKind::ALL.into_iter().flat_map(move |k| self.of(k).values())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ElementNode> {
        self.person
            .values_mut()
            .chain(self.time.values_mut())
            .chain(self.location.values_mut())
            .chain(self.topic.values_mut())
    }

    pub fn len(&self) -> usize {
        self.person.len() + self.time.len() + self.location.len() + self.topic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, node: ElementNode) {
        self.of_mut(node.kind).insert(node.id.clone(), node);
    }
}

/// The consolidated memory: nodes, hyperedges and topic clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermMemory {
    pub schema_version: u32,
    pub nodes: NodeTable,
    pub hyperedges: Vec<Hyperedge>,
    pub common_topics: Vec<String>,
    pub rare_topics: Vec<String>,
}

impl Default for LongTermMemory {
    fn default() -> Self {
        LongTermMemory {
            schema_version: SCHEMA_VERSION,
            nodes: NodeTable::default(),
            hyperedges: Vec::new(),
            common_topics: Vec::new(),
            rare_topics: Vec::new(),
        }
    }
}

impl LongTermMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperedges.is_empty() && self.nodes.is_empty()
    }

    pub fn hyperedge(&self, id: &str) -> Option<&Hyperedge> {
        self.hyperedges.iter().find(|h| h.id == id)
    }

    /// Display names of the nodes referenced by `h` for one kind.
    pub fn names(&self, h: &Hyperedge, kind: ElementKind) -> Vec<&str> {
        h.nodes_of(kind)
            .iter()
            .filter_map(|id| self.nodes.get(id))
            .map(|n| n.name.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Recall,
    Precision,
    Judgement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConstraint {
    pub timestamp: String,
    pub granularity: TimeGranularity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub person: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub location: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topic: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time: Vec<TimeConstraint>,
}

impl Constraints {
    pub fn has(&self, kind: ElementKind) -> bool {
        match kind {
            ElementKind::Person => !self.person.is_empty(),
            ElementKind::Location => !self.location.is_empty(),
            ElementKind::Topic => !self.topic.is_empty(),
            ElementKind::Time => !self.time.is_empty(),
        }
    }

    pub fn is_empty(&self) -> bool {
        !ElementKind::ALL.into_iter().any(|k| self.has(k))
    }
}

/// Structured search plan for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalPlan {
    pub query_type: QueryType,
    #[serde(default)]
    pub constraints: Constraints,
    #[serde(default)]
    pub priority: Vec<ElementKind>,
}

impl RetrievalPlan {
    /// Priority must list only constrained kinds, each once.
    pub fn priority_violation(&self) -> Option<String> {
        let mut seen = BTreeSet::new();
        for k in &self.priority {
            if !seen.insert(*k) {
                return Some(format!("priority lists {k} twice"));
            }
            if !self.constraints.has(*k) {
                return Some(format!("priority lists {k} without a {k} constraint"));
            }
        }
        None
    }
}

/// A hyperedge with its initial and updated retrieval scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub hyperedge_id: String,
    pub initial_score: f64,
    pub salience_term: f64,
    pub topic_term: f64,
    pub updated_score: f64,
    #[serde(default)]
    pub structural: bool,
}

impl ScoredCandidate {
    pub fn new(hyperedge_id: impl Into<String>, initial_score: f64) -> Self {
        ScoredCandidate {
            hyperedge_id: hyperedge_id.into(),
            initial_score,
            salience_term: 0.0,
            topic_term: 0.0,
            updated_score: initial_score,
            structural: false,
        }
    }
}
