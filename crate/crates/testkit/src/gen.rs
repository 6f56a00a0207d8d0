//! Seeded random instances for the oracle comparisons.

use std::collections::BTreeSet;

use bgmem_core::model::{
    BoundaryReason, Constraints, ElementKind, ElementNode, Hyperedge, LongTermMemory, NodeId, QueryType,
    RetrievalPlan, Span, TimeConstraint, TimeGranularity,
};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Node i has kind `ALL[i % 4]` and name `n{i}`.
pub fn node_id(i: usize) -> NodeId {
    NodeId::new(ElementKind::ALL[i % 4], &format!("n{i}"))
}

pub fn span_of(i: usize) -> Span {
    Span::new(format!("s{}", i + 1), 1, 1)
}

/// Id the library gives a hyperedge made of these inputs.
pub fn block_id(block: &[usize]) -> String {
    let spans: Vec<Span> = block.iter().map(|&i| span_of(i)).collect();
    Hyperedge::derive_id(&spans)
}

/// 1..=8 node sets over at most 12 nodes, built around a few shared bases so
/// that above-threshold overlaps are common.
pub fn merge_sets(rng: &mut StdRng) -> Vec<BTreeSet<usize>> {
    let k = rng.random_range(1..=8);
    let n_nodes = rng.random_range(1..=12);
    let bases: Vec<BTreeSet<usize>> = (0..rng.random_range(1..=3))
        .map(|_| {
            let size = rng.random_range(1..=n_nodes);
            let mut all: Vec<usize> = (0..n_nodes).collect();
            all.shuffle(rng);
            all.into_iter().take(size).collect()
        })
        .collect();
    (0..k)
        .map(|_| {
            let mut s = bases.choose(rng).unwrap().clone();
            for _ in 0..rng.random_range(0..=2) {
                let x = rng.random_range(0..n_nodes);
                if !s.remove(&x) {
                    s.insert(x);
                }
            }
            if s.is_empty() {
                s.insert(rng.random_range(0..n_nodes));
            }
            s
        })
        .collect()
}

pub fn hyperedge_of(i: usize, nodes: &BTreeSet<usize>) -> Hyperedge {
    let span = span_of(i);
    let mut h = Hyperedge {
        id: Hyperedge::derive_id(std::slice::from_ref(&span)),
        persons: BTreeSet::new(),
        times: BTreeSet::new(),
        locations: BTreeSet::new(),
        topics: BTreeSet::new(),
        description: format!("segment {i}"),
        reasons: vec![BoundaryReason::TopicShift],
        provenance: vec![span],
    };
    for &n in nodes {
        let id = node_id(n);
        h.nodes_of_mut(id.kind().unwrap()).insert(id);
    }
    h
}

pub fn hyperedges_of(sets: &[BTreeSet<usize>]) -> Vec<Hyperedge> {
    sets.iter().enumerate().map(|(i, s)| hyperedge_of(i, s)).collect()
}

pub const VOCAB: [&str; 14] = [
    "painting", "camping", "pottery", "marathon", "tennis", "cooking", "adoption", "guitar", "hiking", "school",
    "career", "family", "travel", "garden",
];

pub struct RerankInstance {
    pub memory: LongTermMemory,
    pub plan: RetrievalPlan,
    pub candidates: Vec<(String, f64)>,
    pub query: String,
}

fn random_plan(rng: &mut StdRng) -> RetrievalPlan {
    let mut kinds = ElementKind::ALL.to_vec();
    kinds.shuffle(rng);
    kinds.truncate(rng.random_range(0..=4));
    let mut constraints = Constraints::default();
    for k in &kinds {
        match k {
            ElementKind::Person => constraints.person.push("p0".into()),
            ElementKind::Location => constraints.location.push("l0".into()),
            ElementKind::Topic => constraints.topic.push("t0".into()),
            ElementKind::Time => constraints
                .time
                .push(TimeConstraint { timestamp: "2023-05".into(), granularity: TimeGranularity::Month }),
        }
    }
    let query_type = *[QueryType::Recall, QueryType::Precision, QueryType::Judgement].choose(rng).unwrap();
    RetrievalPlan { query_type, constraints, priority: kinds }
}

fn node_name(kind: ElementKind, j: usize) -> String {
    match kind {
        ElementKind::Person => format!("p{j}"),
        ElementKind::Time => format!("2023-05-{:02}", j + 1),
        ElementKind::Location => format!("l{j}"),
        ElementKind::Topic => format!("t{j}"),
    }
}

pub fn rerank_instance(rng: &mut StdRng) -> RerankInstance {
    let mut memory = LongTermMemory::new();
    let mut pool: Vec<Vec<NodeId>> = Vec::new();
    for kind in ElementKind::ALL {
        let ids = (0..rng.random_range(1..=4))
            .map(|j| {
                let name = node_name(kind, j);
                let mut node = match kind {
                    ElementKind::Time => ElementNode::time(name, TimeGranularity::Day),
                    _ => ElementNode::new(kind, name),
                };
                node.salience = rng.random::<f64>();
                let id = node.id.clone();
                memory.nodes.insert(node);
                id
            })
            .collect();
        pool.push(ids);
    }
    let n_edges = rng.random_range(1..=10);
    for i in 0..n_edges {
        let mut h = hyperedge_of(i, &BTreeSet::new());
        for (k, kind) in ElementKind::ALL.into_iter().enumerate() {
            for id in &pool[k] {
                if rng.random_bool(0.4) {
                    h.nodes_of_mut(kind).insert(id.clone());
                }
            }
        }
        memory.hyperedges.push(h);
    }
    let mut words = VOCAB.to_vec();
    words.shuffle(rng);
    let nc = rng.random_range(0..=3);
    let nr = rng.random_range(0..=3);
    memory.common_topics = words[..nc].iter().map(|s| s.to_string()).collect();
    memory.rare_topics = words[nc..nc + nr].iter().map(|s| s.to_string()).collect();
    if nc > 0 && rng.random_bool(0.3) {
        let shared = memory.common_topics[0].clone();
        memory.rare_topics.push(shared);
    }
    let query = (0..rng.random_range(1..=5))
        .map(|_| if rng.random_bool(0.8) { VOCAB.choose(rng).unwrap().to_string() } else { "weekend".to_string() })
        .collect::<Vec<_>>()
        .join(" ");
    let quantize = rng.random_bool(0.3);
    let mut candidates: Vec<(String, f64)> = Vec::new();
    for h in &memory.hyperedges {
        if rng.random_bool(0.8) {
            let xi: f64 = rng.random();
            candidates.push((h.id.clone(), if quantize { (xi * 4.0).round() / 4.0 } else { xi }));
        }
    }
    if candidates.is_empty() {
        candidates.push((memory.hyperedges[0].id.clone(), 0.5));
    }
    RerankInstance { memory, plan: random_plan(rng), candidates, query }
}

/// Descending score vectors of assorted shapes: flat, gapped, negative, tied.
pub fn score_vector(rng: &mut StdRng) -> Vec<f64> {
    let n = rng.random_range(1..=40);
    let mut v: Vec<f64> = match rng.random_range(0..4) {
        0 => (0..n).map(|_| rng.random::<f64>()).collect(),
        1 => (0..n).map(|_| rng.random_range(-1.0..1.5)).collect(),
        2 => (0..n).map(|_| (rng.random_range(0..5) as f64) * 0.25).collect(),
        _ => {
            let mut x = rng.random_range(0.5..1.5);
            (0..n)
                .map(|_| {
                    x -= rng.random_range(0.0..0.3);
                    x
                })
                .collect()
        }
    };
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Random short text over a small alphabet of words, with punctuation and
/// case noise.
pub fn noisy_text(rng: &mut StdRng) -> String {
    const WORDS: [&str; 12] = ["the", "a", "Cat", "cat", "dog", "ran", "KFC", "7", "May", "an", "sunset", "lake"];
    const PUNCT: [&str; 6] = ["", "", ",", ".", "!", "'s"];
    (0..rng.random_range(0..=8))
        .map(|_| format!("{}{}", WORDS.choose(rng).unwrap(), PUNCT.choose(rng).unwrap()))
        .collect::<Vec<_>>()
        .join(" ")
}
