//! Wire format of the boundary-extraction reply and its conversion into a
//! [`BoundaryMemory`].

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::Session;
use crate::model::time::{normalize_timestamp, parse_loose};
use crate::model::{
    BoundaryMemory, BoundaryReason, ElementKind, ElementNode, Hyperedge, Mention, NodeId, Span, TimeGranularity,
};
use crate::text::contains_ci;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMention {
    pub turn: u32,
    pub mention: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePerson {
    pub canonical_name: String,
    #[serde(default)]
    pub role_tags: Vec<String>,
    pub mentions: Vec<WireMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireTime {
    pub timestamp: String,
    pub granularity: TimeGranularity,
    pub mentions: Vec<WireMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireLocation {
    pub name: String,
    pub mentions: Vec<WireMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireTopic {
    pub label: String,
    pub mentions: Vec<WireMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireBoundary {
    pub reasons: Vec<BoundaryReason>,
    pub start_turn: u32,
    pub end_turn: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSegment {
    pub person_list: Vec<String>,
    pub time_list: Vec<String>,
    pub location_list: Vec<String>,
    pub topic_list: Vec<String>,
    pub description: String,
    pub boundary: WireBoundary,
}

/// Reply of the boundary-extraction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionResponse {
    pub persons: Vec<WirePerson>,
    pub times: Vec<WireTime>,
    pub locations: Vec<WireLocation>,
    pub topics: Vec<WireTopic>,
    pub boundary_memories: Vec<WireSegment>,
    /// Optional relations block; accepted and discarded.
    #[serde(default, skip_serializing)]
    pub relations: Option<serde_json::Value>,
}

/// Parse and validate a reply against the extraction schema. Errors carry
/// the JSON path of the offending field.
pub fn parse_extraction(raw: &str) -> Result<ExtractionResponse, String> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let resp: ExtractionResponse = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })?;
    check_fields(&resp)?;
    Ok(resp)
}

fn check_mentions(path: &str, ms: &[WireMention]) -> Result<(), String> {
    for (i, m) in ms.iter().enumerate() {
        if m.turn == 0 {
            return Err(format!("{path}.mentions[{i}].turn: must be >= 1"));
        }
        if m.mention.trim().is_empty() {
            return Err(format!("{path}.mentions[{i}].mention: empty"));
        }
    }
    Ok(())
}

fn non_empty(path: String, s: &str) -> Result<(), String> {
    if s.trim().is_empty() {
        Err(format!("{path}: empty string"))
    } else {
        Ok(())
    }
}

fn check_fields(r: &ExtractionResponse) -> Result<(), String> {
    for (i, p) in r.persons.iter().enumerate() {
        non_empty(format!("persons[{i}].canonical_name"), &p.canonical_name)?;
        check_mentions(&format!("persons[{i}]"), &p.mentions)?;
    }
    for (i, t) in r.times.iter().enumerate() {
        non_empty(format!("times[{i}].timestamp"), &t.timestamp)?;
        check_mentions(&format!("times[{i}]"), &t.mentions)?;
    }
    for (i, l) in r.locations.iter().enumerate() {
        non_empty(format!("locations[{i}].name"), &l.name)?;
        check_mentions(&format!("locations[{i}]"), &l.mentions)?;
    }
    for (i, t) in r.topics.iter().enumerate() {
        non_empty(format!("topics[{i}].label"), &t.label)?;
        check_mentions(&format!("topics[{i}]"), &t.mentions)?;
    }
    if r.boundary_memories.is_empty() {
        return Err("boundary_memories: empty".into());
    }
    for (i, s) in r.boundary_memories.iter().enumerate() {
        let p = format!("boundary_memories[{i}]");
        non_empty(format!("{p}.description"), &s.description)?;
        if s.topic_list.is_empty() {
            return Err(format!("{p}.topic_list: at least one topic required"));
        }
        if s.boundary.reasons.is_empty() {
            return Err(format!("{p}.boundary.reasons: at least one reason required"));
        }
        if s.boundary.start_turn == 0 || s.boundary.start_turn > s.boundary.end_turn {
            return Err(format!(
                "{p}.boundary: bad turn range {}..{}",
                s.boundary.start_turn, s.boundary.end_turn
            ));
        }
    }
    Ok(())
}

/// Outcome of converting a validated reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub memory: BoundaryMemory,
    /// Auto-declared references and other repairs.
    pub repairs: Vec<String>,
    /// Mentions that do not occur verbatim in their turn.
    pub fidelity_violations: Vec<String>,
}

struct Builder<'a> {
    session: &'a Session,
    anchor_day: String,
    nodes: Vec<ElementNode>,
    /// Surface string of a declaration (and its canonical forms) to node id.
    lookup: BTreeMap<(ElementKind, String), NodeId>,
    repairs: Vec<String>,
}

impl Builder<'_> {
    fn declare(&mut self, mut node: ElementNode, keys: &[&str]) -> NodeId {
        let id = node.id.clone();
        match self.nodes.iter_mut().find(|n| n.id == id) {
            Some(existing) => {
                for m in node.mentions.drain(..) {
                    existing.add_mention(m);
                }
                if existing.granularity == Some(TimeGranularity::Approx) && node.granularity.is_some_and(|g| !g.is_approx()) {
                    existing.granularity = node.granularity;
                }
            }
            None => self.nodes.push(node),
        }
        let kind = id.kind().expect("declared ids carry a kind");
        for k in keys {
            self.lookup.entry((kind, k.to_string())).or_insert_with(|| id.clone());
            self.lookup.entry((kind, crate::model::canonical_name(k))).or_insert_with(|| id.clone());
        }
        id
    }

    fn mentions(&self, ms: &[WireMention]) -> Vec<Mention> {
        ms.iter()
            .map(|m| Mention { session_id: self.session.session_id.clone(), turn: m.turn, surface: m.mention.clone() })
            .collect()
    }

    fn time_node(&mut self, raw: &str, g: TimeGranularity) -> ElementNode {
        match normalize_timestamp(raw, g) {
            Some(name) => ElementNode::time(name, g),
            None => {
                self.repairs.push(format!("time {raw:?} is not ISO-8601; stored as the session date (approx)"));
                ElementNode::time(self.anchor_day.clone(), TimeGranularity::Approx)
            }
        }
    }

    fn resolve(&mut self, kind: ElementKind, entry: &str, turn: u32) -> NodeId {
        if let Some(id) = self
            .lookup
            .get(&(kind, entry.to_string()))
            .or_else(|| self.lookup.get(&(kind, crate::model::canonical_name(entry))))
        {
            return id.clone();
        }
        let node = match kind {
            ElementKind::Time => {
                let g = parse_loose(entry).map_or(TimeGranularity::Approx, |(g, _)| g);
                self.time_node(entry, g)
            }
            k => ElementNode::new(k, entry.trim()),
        };
        let node = node.with_mention(&self.session.session_id, turn, entry.trim());
        self.repairs.push(format!("auto-declared {} {:?} referenced at turn {turn}", kind, entry));
        self.declare(node, &[entry])
    }
}

/// Convert a validated reply. Fails when the segments do not partition the
/// session's turns or a mention points outside the session.
pub fn to_boundary_memory(resp: &ExtractionResponse, session: &Session) -> Result<Conversion, String> {
    let n = session.turns.len() as u32;
    let anchor = session.anchor().map_err(|e| e.to_string())?;
    let mut b = Builder {
        session,
        anchor_day: TimeGranularity::Day.render(&anchor),
        nodes: Vec::new(),
        lookup: BTreeMap::new(),
        repairs: Vec::new(),
    };

    let check_turns = |path: String, ms: &[WireMention]| -> Result<(), String> {
        match ms.iter().position(|m| m.turn > n) {
            Some(i) => Err(format!("{path}.mentions[{i}].turn: {} is beyond the last turn {n}", ms[i].turn)),
            None => Ok(()),
        }
    };
    for (i, p) in resp.persons.iter().enumerate() {
        check_turns(format!("persons[{i}]"), &p.mentions)?;
        let mut node = ElementNode::new(ElementKind::Person, p.canonical_name.trim());
        node.mentions = b.mentions(&p.mentions);
        b.declare(node, &[&p.canonical_name]);
    }
    for (i, t) in resp.times.iter().enumerate() {
        check_turns(format!("times[{i}]"), &t.mentions)?;
        let mut node = b.time_node(&t.timestamp, t.granularity);
        node.mentions = b.mentions(&t.mentions);
        b.declare(node, &[&t.timestamp]);
    }
    for (i, l) in resp.locations.iter().enumerate() {
        check_turns(format!("locations[{i}]"), &l.mentions)?;
        let mut node = ElementNode::new(ElementKind::Location, l.name.trim());
        node.mentions = b.mentions(&l.mentions);
        b.declare(node, &[&l.name]);
    }
    for (i, t) in resp.topics.iter().enumerate() {
        check_turns(format!("topics[{i}]"), &t.mentions)?;
        let mut node = ElementNode::new(ElementKind::Topic, t.label.trim());
        node.mentions = b.mentions(&t.mentions);
        b.declare(node, &[&t.label]);
    }

    let mut segments: Vec<&WireSegment> = resp.boundary_memories.iter().collect();
    segments.sort_by_key(|s| s.boundary.start_turn);
    let mut next = 1;
    for s in &segments {
        let (a, z) = (s.boundary.start_turn, s.boundary.end_turn);
        if a != next {
            return Err(if a < next {
                format!("boundary_memories: turns {a}..{z} overlap an earlier segment")
            } else {
                format!("boundary_memories: turns {next}..{} are not covered", a - 1)
            });
        }
        next = z + 1;
    }
    if next != n + 1 {
        return Err(format!("boundary_memories: segments end at turn {}, session has {n} turns", next - 1));
    }

    let mut hyperedges = Vec::new();
    for s in segments {
        let turn = s.boundary.start_turn;
        let mut ids = |kind: ElementKind, list: &[String]| -> std::collections::BTreeSet<NodeId> {
            list.iter().filter(|e| !e.trim().is_empty()).map(|e| b.resolve(kind, e, turn)).collect()
        };
        let persons = ids(ElementKind::Person, &s.person_list);
        let times = ids(ElementKind::Time, &s.time_list);
        let locations = ids(ElementKind::Location, &s.location_list);
        let topics = ids(ElementKind::Topic, &s.topic_list);
        let mut reasons = Vec::new();
        for r in &s.boundary.reasons {
            if !reasons.contains(r) {
                reasons.push(*r);
            }
        }
        let span = Span::new(session.session_id.clone(), s.boundary.start_turn, s.boundary.end_turn);
        hyperedges.push(Hyperedge {
            id: Hyperedge::derive_id(std::slice::from_ref(&span)),
            persons,
            times,
            locations,
            topics,
            description: s.description.trim().to_string(),
            reasons,
            provenance: vec![span],
        });
    }

    // declared but never given a mention: anchor on the first segment using it
    for node in &mut b.nodes {
        if node.mentions.is_empty() {
            let turn = hyperedges
                .iter()
                .find(|h| h.nodes_of(node.kind).contains(&node.id))
                .map_or(1, |h| h.provenance[0].start_turn);
            node.mentions.push(Mention { session_id: session.session_id.clone(), turn, surface: node.name.clone() });
            b.repairs.push(format!("{} has no mentions; added a synthetic mention at turn {turn}", node.id));
        }
    }

    let mut fidelity_violations = Vec::new();
    for node in &b.nodes {
        for m in &node.mentions {
            let line = session.line(m.turn).unwrap_or_default();
            if !contains_ci(&line, &m.surface) {
                fidelity_violations.push(format!("{}: {:?} does not occur in turn {}", node.id, m.surface, m.turn));
            }
        }
    }

    let mut nodes = b.nodes;
    nodes.sort_by(|x, y| x.id.cmp(&y.id));
    Ok(Conversion {
        memory: BoundaryMemory { session_id: session.session_id.clone(), nodes, hyperedges },
        repairs: b.repairs,
        fidelity_violations,
    })
}
