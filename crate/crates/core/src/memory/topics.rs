//! Common/rare topic clustering.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};

use super::MemoryError;
use crate::llm::{Backend, TokenUsage};
use crate::model::LongTermMemory;
use crate::prompts;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicClusters {
    pub common_topics: Vec<String>,
    pub rare_topics: Vec<String>,
}

/// Topic labels with their hyperedge degree, most connected first, ties by label.
pub fn ranked_topics(memory: &LongTermMemory) -> Vec<(String, usize)> {
    let mut degree: BTreeMap<&str, usize> = memory.nodes.topic.values().map(|n| (n.name.as_str(), 0)).collect();
    for h in &memory.hyperedges {
        for id in &h.topics {
            if let Some(n) = memory.nodes.topic.get(id) {
                *degree.entry(n.name.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = degree.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Side size: a quarter of the topics, clamped to 3..=5.
pub fn cluster_size(n_topics: usize) -> usize {
    n_topics.div_ceil(4).clamp(3, 5)
}

/// Degree ranking: the top `k` are common, the bottom `k` rare. A topic
/// eligible for both goes to the side where its rank is stronger; equal
/// ranks are dropped.
pub fn mock_clusters(memory: &LongTermMemory) -> TopicClusters {
    let ranked = ranked_topics(memory);
    let n = ranked.len();
    let k = cluster_size(n);
    let mut out = TopicClusters::default();
    for (i, (label, _)) in ranked.iter().enumerate() {
        let from_top = i + 1;
        let from_bottom = n - i;
        let (common, rare) = (from_top <= k, from_bottom <= k);
        match (common, rare) {
            (true, false) => out.common_topics.push(label.clone()),
            (false, true) => out.rare_topics.push(label.clone()),
            (true, true) if from_top < from_bottom => out.common_topics.push(label.clone()),
            (true, true) if from_bottom < from_top => out.rare_topics.push(label.clone()),
            _ => {}
        }
    }
    // rare side listed rarest first
    out.rare_topics.reverse();
    out
}

/// Validate a clustering reply: exactly the two string lists, every label
/// verbatim from the input, at most 5 per side. Duplicates are removed and a
/// label on both sides is dropped from both.
pub fn parse_clusters(raw: &str, input: &[String]) -> Result<TopicClusters, String> {
    let value: Value = serde_json::from_str(raw).map_err(|e| format!("not JSON: {e}"))?;
    let obj = value.as_object().ok_or("top level must be an object")?;
    for key in obj.keys() {
        if key != "common_topics" && key != "rare_topics" {
            return Err(format!("unexpected key {key:?}"));
        }
    }
    let known: BTreeSet<&str> = input.iter().map(String::as_str).collect();
    let min_len = 3.min(input.len() / 2);
    let side = |key: &str| -> Result<Vec<String>, String> {
        let list = obj.get(key).ok_or(format!("missing {key}"))?.as_array().ok_or(format!("{key} must be an array"))?;
        let mut out: Vec<String> = Vec::new();
        for (i, v) in list.iter().enumerate() {
            let s = v.as_str().ok_or(format!("{key}[{i}] must be a string"))?;
            if !known.contains(s) {
                return Err(format!("{key}[{i}] {s:?} is not one of the input topics"));
            }
            if !out.iter().any(|x| x == s) {
                out.push(s.to_string());
            }
        }
        if out.len() > 5 {
            return Err(format!("{key} has {} topics, at most 5 allowed", out.len()));
        }
        if out.len() < min_len {
            return Err(format!("{key} has {} topics, at least {min_len} required", out.len()));
        }
        Ok(out)
    };
    let (mut common, mut rare) = (side("common_topics")?, side("rare_topics")?);
    let both: BTreeSet<String> = common.iter().filter(|t| rare.contains(t)).cloned().collect();
    common.retain(|t| !both.contains(t));
    rare.retain(|t| !both.contains(t));
    Ok(TopicClusters { common_topics: common, rare_topics: rare })
}

pub fn cluster_topics(memory: &LongTermMemory, backend: &Backend) -> Result<(TopicClusters, TokenUsage), MemoryError> {
    let labels: Vec<String> = ranked_topics(memory).into_iter().map(|(l, _)| l).collect();
    if labels.is_empty() {
        return Err(MemoryError::NoTopics);
    }
    let prompt = prompts::topic_clustering(&labels);
    match backend {
        Backend::Mock => {
            let clusters = mock_clusters(memory);
            let reply = serde_json::to_string(&clusters).expect("clusters serialize");
            Ok((clusters, TokenUsage::approx(&prompt, &reply)))
        }
        Backend::Remote(client) => client
            .request_json(&prompt, "topic_clusters", &prompts::topic_clustering_schema(), |raw| {
                parse_clusters(raw, &labels)
            })
            .map_err(MemoryError::Clustering),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryReason, ElementKind, ElementNode, Hyperedge, Span};

    /// Memory whose topic `t{i}` appears in `degrees[i]` hyperedges.
    fn memory_with_degrees(degrees: &[usize]) -> LongTermMemory {
        let mut m = LongTermMemory::new();
        let mut session = 0;
        for (i, &d) in degrees.iter().enumerate() {
            let label = format!("t{i}");
            m.nodes.insert(ElementNode::new(ElementKind::Topic, &label).with_mention("s", 1, &label));
            for _ in 0..d {
                session += 1;
                let span = Span::new(format!("s{session}"), 1, 1);
                m.hyperedges.push(Hyperedge {
                    id: Hyperedge::derive_id(std::slice::from_ref(&span)),
                    persons: Default::default(),
                    times: Default::default(),
                    locations: Default::default(),
                    topics: [crate::model::NodeId::new(ElementKind::Topic, &label)].into(),
                    description: "d".into(),
                    reasons: vec![BoundaryReason::TopicShift],
                    provenance: vec![span],
                });
            }
        }
        m
    }

    #[test]
    fn six_topics_split_three_and_three() {
        let m = memory_with_degrees(&[9, 8, 7, 2, 1, 1]);
        let c = mock_clusters(&m);
        assert_eq!(c.common_topics, ["t0", "t1", "t2"]);
        // degree ranking: t3 (2), then t4/t5 (1) by label; rarest first
        assert_eq!(c.rare_topics, ["t5", "t4", "t3"]);
    }

    #[test]
    fn three_topics_resolve_overlap_by_rank() {
        let m = memory_with_degrees(&[5, 3, 1]);
        let c = mock_clusters(&m);
        assert_eq!(c.common_topics, ["t0"]);
        assert_eq!(c.rare_topics, ["t2"]);
    }

    #[test]
    fn remote_reply_with_invented_label_is_rejected() {
        let input: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
        let ok = r#"{"common_topics":["t0","t1","t2"],"rare_topics":["t3","t4","t5"]}"#;
        assert!(parse_clusters(ok, &input).is_ok());
        let bad = r#"{"common_topics":["t0","t1","dragons"],"rare_topics":["t3","t4","t5"]}"#;
        assert!(parse_clusters(bad, &input).unwrap_err().contains("dragons"));
    }

    #[test]
    fn cluster_topics_requires_topics() {
        assert!(matches!(cluster_topics(&LongTermMemory::new(), &Backend::Mock), Err(MemoryError::NoTopics)));
    }
}
