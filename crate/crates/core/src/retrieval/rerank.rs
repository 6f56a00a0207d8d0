//! Updated hyperedge scores: ξ̂ = ξ + Ω_S + Ω_T.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, similarity, EmbedError, Embedder, Embedding};
use crate::model::{ElementKind, Hyperedge, LongTermMemory, RetrievalPlan, ScoredCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    /// Scale of the priority weights β·2^(−rank).
    pub beta: f64,
    /// Scale of the topic term.
    pub gamma: f64,
    /// Softmax temperature of the topic weights.
    pub temperature: f64,
    /// Compare each candidate's description, rather than the query, against
    /// the rare and common terms.
    pub per_candidate_topic: bool,
    /// Topics closer than this to a topic on the other side are dropped.
    pub overlap_cosine: f64,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig { beta: 0.3, gamma: 0.2, temperature: 1.0, per_candidate_topic: false, overlap_cosine: 0.95 }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err("beta and gamma must be >= 0".into());
        }
        if !(self.temperature > 0.0) {
            return Err("temperature must be > 0".into());
        }
        if !(-1.0..=1.0).contains(&self.overlap_cosine) {
            return Err("overlap_cosine must be in [-1, 1]".into());
        }
        Ok(())
    }
}

/// Rare and common topic terms of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTerms {
    pub rare_topics: Vec<String>,
    pub common_topics: Vec<String>,
    pub rare_weights: Vec<f64>,
    pub common_weights: Vec<f64>,
    /// Topics removed as overlapping the other side.
    pub dropped: Vec<String>,
    #[serde(skip)]
    pub rare_term: Option<Embedding>,
    #[serde(skip)]
    pub common_term: Option<Embedding>,
}

impl QueryTerms {
    pub fn empty() -> Self {
        QueryTerms {
            rare_topics: Vec::new(),
            common_topics: Vec::new(),
            rare_weights: Vec::new(),
            common_weights: Vec::new(),
            dropped: Vec::new(),
            rare_term: None,
            common_term: None,
        }
    }

    /// sim(e, rare) − sim(e, common); 0 when either side is empty.
    pub fn gap(&self, e: &Embedding) -> Result<f64, EmbedError> {
        match (&self.rare_term, &self.common_term) {
            (Some(r), Some(c)) => Ok(similarity(e, r)? - similarity(e, c)?),
            _ => Ok(0.0),
        }
    }
}

/// Softmax of `xs / temperature`, shifted by the maximum for stability.
pub fn softmax(xs: &[f64], temperature: f64) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = xs.iter().map(|x| ((x - m) / temperature).exp()).collect();
    let z: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / z).collect()
}

fn weighted_term(vs: &[Embedding], ws: &[f64]) -> Option<Embedding> {
    let dim = vs.first()?.dim();
    let mut acc = vec![0.0; dim];
    for (v, w) in vs.iter().zip(ws) {
        for (a, x) in acc.iter_mut().zip(&v.values) {
            *a += w * x;
        }
    }
    Some(Embedding::normalized(acc))
}

pub fn compute_query_terms(
    query: &Embedding,
    memory: &LongTermMemory,
    embedder: &dyn Embedder,
    cfg: &RerankConfig,
) -> Result<QueryTerms, EmbedError> {
    let embed_all = |ts: &[String]| ts.iter().map(|t| embedder.embed(t)).collect::<Result<Vec<_>, _>>();
    let (common_v, rare_v) = (embed_all(&memory.common_topics)?, embed_all(&memory.rare_topics)?);
    let near = |v: &Embedding, others: &[Embedding]| -> Result<bool, EmbedError> {
        for o in others {
            if cosine(v, o)? > cfg.overlap_cosine {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let mut terms = QueryTerms::empty();
    let mut keep = |topics: &[String], vs: &[Embedding], others: &[Embedding]| -> Result<(Vec<String>, Vec<Embedding>), EmbedError> {
        let mut kept = (Vec::new(), Vec::new());
        for (t, v) in topics.iter().zip(vs) {
            if near(v, others)? {
                terms.dropped.push(t.clone());
            } else {
                kept.0.push(t.clone());
                kept.1.push(v.clone());
            }
        }
        Ok(kept)
    };
    let (common_t, common_kept) = keep(&memory.common_topics, &common_v, &rare_v)?;
    let (rare_t, rare_kept) = keep(&memory.rare_topics, &rare_v, &common_v)?;
    if (common_kept.is_empty() || rare_kept.is_empty())
        && (!memory.common_topics.is_empty() || !memory.rare_topics.is_empty())
    {
        log::info!("a topic side is empty after overlap removal; topic term is 0 for this query");
    }
    let weights = |vs: &[Embedding]| -> Result<Vec<f64>, EmbedError> {
        let sims = vs.iter().map(|v| similarity(query, v)).collect::<Result<Vec<_>, _>>()?;
        Ok(softmax(&sims, cfg.temperature))
    };
    terms.common_weights = weights(&common_kept)?;
    terms.rare_weights = weights(&rare_kept)?;
    if !common_kept.is_empty() && !rare_kept.is_empty() {
        terms.common_term = weighted_term(&common_kept, &terms.common_weights);
        terms.rare_term = weighted_term(&rare_kept, &terms.rare_weights);
    }
    terms.common_topics = common_t;
    terms.rare_topics = rare_t;
    Ok(terms)
}

/// Ω_S: Σ_k β·2^(−rank_k) · mean salience of the hyperedge's kind-k nodes,
/// over the plan's priority order (rank 0 first).
pub fn salience_term(h: &Hyperedge, memory: &LongTermMemory, priority: &[ElementKind], beta: f64) -> f64 {
    let mut total = 0.0;
    for (rank, kind) in priority.iter().enumerate() {
        let ids = h.nodes_of(*kind);
        let sal: Vec<f64> = ids.iter().filter_map(|id| memory.nodes.get(id)).map(|n| n.salience).collect();
        if sal.is_empty() {
            continue;
        }
        let mean = sal.iter().sum::<f64>() / sal.len() as f64;
        total += beta * 0.5f64.powi(rank as i32) * mean;
    }
    total
}

/// ξ̂ = ξ + Ω_S + Ω_T with a caller-supplied topic term and sort by ξ̂ descending,
/// ties by hyperedge id.
pub fn rerank_with(
    candidates: Vec<ScoredCandidate>,
    plan: &RetrievalPlan,
    memory: &LongTermMemory,
    beta: f64,
    topic_term: impl Fn(&ScoredCandidate) -> f64,
) -> Vec<ScoredCandidate> {
    let mut out: Vec<ScoredCandidate> = candidates
        .into_iter()
        .map(|mut c| {
            c.salience_term = memory.hyperedge(&c.hyperedge_id).map_or(0.0, |h| salience_term(h, memory, &plan.priority, beta));
            c.topic_term = topic_term(&c);
            c.updated_score = c.initial_score + c.salience_term + c.topic_term;
            c
        })
        .collect();
    out.sort_by(|a, b| b.updated_score.total_cmp(&a.updated_score).then_with(|| a.hyperedge_id.cmp(&b.hyperedge_id)));
    out
}

/// Rerank with the query-level topic term γ·(sim(q, rare) − sim(q, common)),
/// identical for every candidate.
pub fn rerank(
    candidates: Vec<ScoredCandidate>,
    plan: &RetrievalPlan,
    memory: &LongTermMemory,
    query: &Embedding,
    terms: &QueryTerms,
    cfg: &RerankConfig,
) -> Result<Vec<ScoredCandidate>, EmbedError> {
    let omega_t = cfg.gamma * terms.gap(query)?;
    Ok(rerank_with(candidates, plan, memory, cfg.beta, |_| omega_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    #[test]
    fn softmax_limits() {
        let w = softmax(&[0.9, 0.1, 0.5], 1e12);
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-6));
        let w = softmax(&[2.0, 1.9, 0.1], 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let z = 1.0 + (-0.1f64).exp() + (-1.9f64).exp();
        assert!((w[0] - 1.0 / z).abs() < 1e-12 && (w[2] - (-1.9f64).exp() / z).abs() < 1e-12);
    }

    fn memory_with_topics(common: &[&str], rare: &[&str]) -> LongTermMemory {
        let mut m = LongTermMemory::new();
        m.common_topics = common.iter().map(|s| s.to_string()).collect();
        m.rare_topics = rare.iter().map(|s| s.to_string()).collect();
        m
    }

    #[test]
    fn query_matching_the_rare_topic_gets_a_positive_term() {
        let e = HashEmbedder::default();
        let m = memory_with_topics(&["weather chat"], &["pottery workshop"]);
        let q = e.embed("pottery workshop").unwrap();
        let t = compute_query_terms(&q, &m, &e, &RerankConfig::default()).unwrap();
        assert!(t.gap(&q).unwrap() > 0.0);
        assert!((t.rare_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cross_listed_topic_is_dropped_from_both_sides() {
        let e = HashEmbedder::default();
        let m = memory_with_topics(&["camping"], &["camping"]);
        let q = e.embed("camping").unwrap();
        let t = compute_query_terms(&q, &m, &e, &RerankConfig::default()).unwrap();
        assert_eq!(t.dropped, ["camping", "camping"]);
        assert!(t.rare_topics.is_empty() && t.common_topics.is_empty());
        assert_eq!(t.gap(&q).unwrap(), 0.0);
    }
}
