//! Query-type specific stopping rules over the reranked list.

use serde::{Deserialize, Serialize};

use super::rerank::softmax;
use crate::model::{QueryType, ScoredCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopPolicyConfig {
    pub lambda_knee: f64,
    /// Recall only keeps candidates above this fraction of the top score.
    pub knee_floor_fraction: f64,
    pub precision_scale: f64,
    pub judgment_scale: f64,
    pub softmax_temperature: f64,
    pub max_candidates: usize,
}

impl Default for StopPolicyConfig {
    fn default() -> Self {
        StopPolicyConfig {
            lambda_knee: 0.1,
            knee_floor_fraction: 0.5,
            precision_scale: 0.8,
            judgment_scale: 0.8,
            softmax_temperature: 1.0,
            max_candidates: 50,
        }
    }
}

impl StopPolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.precision_scale) || !unit(self.judgment_scale) {
            return Err("precision_scale and judgment_scale must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.knee_floor_fraction) {
            return Err("knee_floor_fraction must be in [0, 1]".into());
        }
        if !(self.lambda_knee > 0.0) {
            return Err("lambda_knee must be > 0".into());
        }
        if !(self.softmax_temperature > 0.0) {
            return Err("softmax_temperature must be > 0".into());
        }
        if self.max_candidates == 0 {
            return Err("max_candidates must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub hyperedge_id: String,
    pub score: f64,
    /// Recall: score minus the next score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_to_next: Option<f64>,
    /// Judgement: softmax probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax: Option<f64>,
    pub selected: bool,
}

/// Everything needed to replay a stopping decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTrace {
    pub policy: QueryType,
    pub config: StopPolicyConfig,
    pub max_score: f64,
    /// Score (or probability, for judgement) a candidate must reach.
    pub threshold: f64,
    /// Recall: index of the knee, when one was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knee_index: Option<usize>,
    /// Selection came from the top-1 guarantee.
    pub forced_top: bool,
    /// Selection was cut at `max_candidates`.
    pub capped: bool,
    pub entries: Vec<TraceEntry>,
}

impl StopTrace {
    pub fn selected(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.selected).map(|e| e.hyperedge_id.clone()).collect()
    }
}

/// Select a subset of `ranked` (sorted by ξ̂ descending) for the policy.
/// The selection is never empty when `ranked` is not.
pub fn adaptive_stop(ranked: &[ScoredCandidate], policy: QueryType, cfg: &StopPolicyConfig) -> StopTrace {
    let ids: Vec<String> = ranked.iter().map(|c| c.hyperedge_id.clone()).collect();
    let scores: Vec<f64> = ranked.iter().map(|c| c.updated_score).collect();
    stop_scores(&ids, &scores, policy, cfg)
}

/// Replay a trace from its recorded scores and configuration.
pub fn replay(trace: &StopTrace) -> Vec<String> {
    let ids: Vec<String> = trace.entries.iter().map(|e| e.hyperedge_id.clone()).collect();
    let scores: Vec<f64> = trace.entries.iter().map(|e| e.score).collect();
    stop_scores(&ids, &scores, trace.policy, &trace.config).selected()
}

fn stop_scores(ids: &[String], scores: &[f64], policy: QueryType, cfg: &StopPolicyConfig) -> StopTrace {
    let n = scores.len();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut entries: Vec<TraceEntry> = ids
        .iter()
        .zip(scores)
        .map(|(id, s)| TraceEntry { hyperedge_id: id.clone(), score: *s, drop_to_next: None, softmax: None, selected: false })
        .collect();
    let mut trace = StopTrace {
        policy,
        config: cfg.clone(),
        max_score: if n == 0 { 0.0 } else { max },
        threshold: 0.0,
        knee_index: None,
        forced_top: false,
        capped: false,
        entries: Vec::new(),
    };
    if n == 0 {
        return trace;
    }
    let mut chosen: Vec<bool> = vec![false; n];
    match policy {
        QueryType::Recall => {
            let floor = cfg.knee_floor_fraction * max;
            trace.threshold = floor;
            for i in 0..n.saturating_sub(1) {
                entries[i].drop_to_next = Some(scores[i] - scores[i + 1]);
            }
            let knee = (0..n.saturating_sub(1)).find(|&i| scores[i] - scores[i + 1] > cfg.lambda_knee && scores[i] > floor);
            trace.knee_index = knee;
            match knee {
                Some(k) => chosen[..=k].iter_mut().for_each(|c| *c = true),
                None => {
                    for i in 0..n {
                        chosen[i] = scores[i] > floor;
                    }
                }
            }
        }
        QueryType::Precision => {
            let t = cfg.precision_scale * max;
            trace.threshold = t;
            for i in 0..n {
                chosen[i] = scores[i] >= t;
            }
        }
        QueryType::Judgement => {
            let p = softmax(scores, cfg.softmax_temperature);
            let pmax = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let t = cfg.judgment_scale * pmax;
            trace.threshold = t;
            for i in 0..n {
                entries[i].softmax = Some(p[i]);
                chosen[i] = p[i] >= t;
            }
        }
    }
    let mut count = 0;
    for (i, c) in chosen.iter_mut().enumerate() {
        if *c {
            count += 1;
            if count > cfg.max_candidates {
                *c = false;
                trace.capped = true;
            }
        }
        entries[i].selected = *c;
    }
    if count == 0 {
        trace.forced_top = true;
        entries[0].selected = true;
    }
    trace.entries = entries;
    trace
}
