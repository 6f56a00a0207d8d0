//! Node salience from frequency, centrality and diversity.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::fmt::round9;
use crate::model::{ElementKind, LongTermMemory, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalienceBreakdown {
    /// Number of mentions.
    pub frequency: f64,
    /// Number of hyperedges containing the node.
    pub centrality: f64,
    /// Distinct other nodes co-occurring in those hyperedges.
    pub diversity: f64,
    pub combined: f64,
}

/// Relative weights of the three normalized dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SalienceWeights {
    pub frequency: f64,
    pub centrality: f64,
    pub diversity: f64,
}

impl Default for SalienceWeights {
    fn default() -> Self {
        SalienceWeights { frequency: 1.0, centrality: 1.0, diversity: 1.0 }
    }
}

fn normalize(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.5
    }
}

pub fn compute_salience(memory: &LongTermMemory, weights: &SalienceWeights) -> BTreeMap<NodeId, SalienceBreakdown> {
    let mut degree: BTreeMap<&NodeId, usize> = BTreeMap::new();
    let mut neighbours: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
    for h in &memory.hyperedges {
        let set = h.node_set();
        for &n in &set {
            *degree.entry(n).or_default() += 1;
            let nb = neighbours.entry(n).or_default();
            nb.extend(set.iter().copied().filter(|m| *m != n));
        }
    }

    let total_w = weights.frequency + weights.centrality + weights.diversity;
    let mut out = BTreeMap::new();
    for kind in ElementKind::ALL {
        let raw: Vec<(&NodeId, [f64; 3])> = memory
            .nodes
            .of(kind)
            .values()
            .map(|n| {
                let f = n.mentions.len() as f64;
                let c = degree.get(&n.id).copied().unwrap_or(0) as f64;
                let d = neighbours.get(&n.id).map_or(0, BTreeSet::len) as f64;
                (&n.id, [f, c, d])
            })
            .collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (_, dims) in &raw {
            for k in 0..3 {
                lo[k] = lo[k].min(dims[k]);
                hi[k] = hi[k].max(dims[k]);
            }
        }
        for (id, [f, c, d]) in raw {
            let combined = if total_w > 0.0 {
                (weights.frequency * normalize(f, lo[0], hi[0])
                    + weights.centrality * normalize(c, lo[1], hi[1])
                    + weights.diversity * normalize(d, lo[2], hi[2]))
                    / total_w
            } else {
                0.5
            };
            out.insert(
                id.clone(),
                SalienceBreakdown {
                    frequency: f,
                    centrality: c,
                    diversity: d,
                    combined: round9(combined.clamp(0.0, 1.0)),
                },
            );
        }
    }
    out
}

/// Recompute and store the combined salience of every node.
pub fn apply_salience(memory: &mut LongTermMemory, weights: &SalienceWeights) {
    let table = compute_salience(memory, weights);
    for node in memory.nodes.iter_mut() {
        node.salience = table.get(&node.id).map_or(0.5, |b| b.combined);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryReason, ElementNode, Hyperedge, Span};

    #[test]
    fn single_node_is_half() {
        let mut m = LongTermMemory::new();
        m.nodes.insert(ElementNode::new(ElementKind::Topic, "x").with_mention("s", 1, "x"));
        let s = compute_salience(&m, &SalienceWeights::default());
        assert_eq!(s.values().next().unwrap().combined, 0.5);
    }

    #[test]
    fn ubiquitous_node_beats_rare_node() {
        let mut m = LongTermMemory::new();
        let hub = ElementNode::new(ElementKind::Person, "hub");
        let rare = ElementNode::new(ElementKind::Person, "rare").with_mention("s1", 1, "rare");
        let mut hub = hub;
        for i in 1..=5u32 {
            let sid = format!("s{i}");
            hub.add_mention(crate::model::Mention { session_id: sid.clone(), turn: 1, surface: "hub".into() });
            let topic = ElementNode::new(ElementKind::Topic, format!("t{i}")).with_mention(&sid, 1, "t");
            let mut persons = std::collections::BTreeSet::from([hub.id.clone()]);
            if i == 1 {
                persons.insert(rare.id.clone());
            }
            let span = Span::new(sid, 1, 1);
            m.hyperedges.push(Hyperedge {
                id: Hyperedge::derive_id(std::slice::from_ref(&span)),
                persons,
                times: Default::default(),
                locations: Default::default(),
                topics: [topic.id.clone()].into(),
                description: "d".into(),
                reasons: vec![BoundaryReason::TopicShift],
                provenance: vec![span],
            });
            m.nodes.insert(topic);
        }
        let (hub_id, rare_id) = (hub.id.clone(), rare.id.clone());
        m.nodes.insert(hub);
        m.nodes.insert(rare);
        let s = compute_salience(&m, &SalienceWeights::default());
        // hub: f=5 c=5 d=6 ; rare: f=1 c=1 d=2  -> hub normalizes to 1, rare to 0
        assert_eq!(s[&hub_id].combined, 1.0);
        assert_eq!(s[&rare_id].combined, 0.0);
        assert_eq!(s[&hub_id].diversity, 6.0);
        assert!(s.values().all(|b| (0.0..=1.0).contains(&b.combined)));
    }
}
