//! Straight-line reference for the updated score ξ̂ = ξ + Ω_S + Ω_T.

use bgmem_core::embedding::Embedder;
use bgmem_core::model::{ElementKind, LongTermMemory, RetrievalPlan};

pub struct RerankParams {
    pub beta: f64,
    pub gamma: f64,
    pub temperature: f64,
    pub overlap: f64,
}

impl Default for RerankParams {
    fn default() -> Self {
        RerankParams { beta: 0.3, gamma: 0.2, temperature: 1.0, overlap: 0.95 }
    }
}

#[derive(Debug, Clone)]
pub struct Expected {
    pub id: String,
    pub xi: f64,
    pub omega_s: f64,
    pub omega_t: f64,
    pub xi_hat: f64,
}

fn vec_of(e: &dyn Embedder, text: &str) -> Vec<f64> {
    e.embed(text).expect("embedding").values
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn sim(a: &[f64], b: &[f64]) -> f64 {
    0.5 + 0.5 * cos(a, b)
}

/// Topic vectors that are not too close to any topic on the other side.
fn survivors(own: &[Vec<f64>], other: &[Vec<f64>], overlap: f64) -> Vec<Vec<f64>> {
    own.iter().filter(|v| other.iter().all(|o| cos(v, o) <= overlap)).cloned().collect()
}

fn weighted_sum(q: &[f64], vs: &[Vec<f64>], temperature: f64) -> Vec<f64> {
    let raw: Vec<f64> = vs.iter().map(|v| (sim(q, v) / temperature).exp()).collect();
    let z: f64 = raw.iter().sum();
    let mut out = vec![0.0; q.len()];
    for (v, r) in vs.iter().zip(&raw) {
        for d in 0..out.len() {
            out[d] += r / z * v[d];
        }
    }
    out
}

pub fn omega_t(query: &str, memory: &LongTermMemory, embedder: &dyn Embedder, p: &RerankParams) -> f64 {
    let q = vec_of(embedder, query);
    let common: Vec<Vec<f64>> = memory.common_topics.iter().map(|t| vec_of(embedder, t)).collect();
    let rare: Vec<Vec<f64>> = memory.rare_topics.iter().map(|t| vec_of(embedder, t)).collect();
    let c = survivors(&common, &rare, p.overlap);
    let r = survivors(&rare, &common, p.overlap);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let c_term = weighted_sum(&q, &c, p.temperature);
    let r_term = weighted_sum(&q, &r, p.temperature);
    p.gamma * (sim(&q, &r_term) - sim(&q, &c_term))
}

pub fn omega_s(hyperedge_id: &str, memory: &LongTermMemory, plan: &RetrievalPlan, beta: f64) -> f64 {
    let Some(h) = memory.hyperedges.iter().find(|h| h.id == hyperedge_id) else { return 0.0 };
    let mut total = 0.0;
    let mut weight = beta;
    for kind in &plan.priority {
        let ids = match kind {
            ElementKind::Person => &h.persons,
            ElementKind::Time => &h.times,
            ElementKind::Location => &h.locations,
            ElementKind::Topic => &h.topics,
        };
        let mut sum = 0.0;
        let mut n = 0;
        for id in ids {
            if let Some(node) = memory.nodes.iter().find(|node| &node.id == id) {
                sum += node.salience;
                n += 1;
            }
        }
        if n > 0 {
            total += weight * sum / n as f64;
        }
        weight /= 2.0;
    }
    total
}

/// Expected scores, ordered by ξ̂ descending then id.
pub fn expected_rerank(
    candidates: &[(String, f64)],
    plan: &RetrievalPlan,
    memory: &LongTermMemory,
    query: &str,
    embedder: &dyn Embedder,
    p: &RerankParams,
) -> Vec<Expected> {
    let t = omega_t(query, memory, embedder, p);
    let mut out: Vec<Expected> = candidates
        .iter()
        .map(|(id, xi)| {
            let s = omega_s(id, memory, plan, p.beta);
            Expected { id: id.clone(), xi: *xi, omega_s: s, omega_t: t, xi_hat: xi + s + t }
        })
        .collect();
    out.sort_by(|a, b| b.xi_hat.partial_cmp(&a.xi_hat).unwrap().then(a.id.cmp(&b.id)));
    out
}
