use crate::model::{ElementKind, Hyperedge};

/// Hyperedges whose node-set Jaccard strictly exceeds this are merged.
pub const MERGE_THRESHOLD: f64 = 0.8;

/// |N(a) ∩ N(b)| / |N(a) ∪ N(b)| over the union of the four element-id sets.
/// Two empty node sets score 0.
pub fn jaccard(a: &Hyperedge, b: &Hyperedge) -> f64 {
    let (na, nb) = (a.node_set(), b.node_set());
    let inter = na.intersection(&nb).count();
    let union = na.len() + nb.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Merge two hyperedges: element sets are unioned, descriptions joined with
/// " | " in provenance order, reasons deduplicated in order.
pub fn merge_pair(a: &Hyperedge, b: &Hyperedge) -> Hyperedge {
    let (first, second) = if (a.first_span(), &a.id) <= (b.first_span(), &b.id) { (a, b) } else { (b, a) };
    let mut merged = first.clone();
    for kind in ElementKind::ALL {
        merged.nodes_of_mut(kind).extend(second.nodes_of(kind).iter().cloned());
    }
    merged.description = format!("{} | {}", first.description, second.description);
    for r in &second.reasons {
        if !merged.reasons.contains(r) {
            merged.reasons.push(*r);
        }
    }
    merged.provenance.extend(second.provenance.iter().cloned());
    merged.provenance.sort();
    merged.provenance.dedup();
    merged.id = Hyperedge::derive_id(&merged.provenance);
    merged
}

/// Repeatedly merge the highest-Jaccard pair above [`MERGE_THRESHOLD`]
/// (ties broken by the lexicographically smallest id pair) until no pair
/// qualifies. Output is sorted by first provenance span.
pub fn merge_fixpoint(hyperedges: Vec<Hyperedge>) -> Vec<Hyperedge> {
    let mut hs = hyperedges;
    loop {
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                let score = jaccard(&hs[i], &hs[j]);
                if score <= MERGE_THRESHOLD {
                    continue;
                }
                let key = if hs[i].id <= hs[j].id {
                    (hs[i].id.clone(), hs[j].id.clone())
                } else {
                    (hs[j].id.clone(), hs[i].id.clone())
                };
                let better = match &best {
                    None => true,
                    Some((s, k, _, _)) => score > *s || (score == *s && key < *k),
                };
                if better {
                    best = Some((score, key, i, j));
                }
            }
        }
        let Some((_, _, i, j)) = best else { break };
        let merged = merge_pair(&hs[i], &hs[j]);
        hs.swap_remove(j);
        hs.swap_remove(i);
        hs.push(merged);
    }
    hs.sort_by(|a, b| (a.first_span(), &a.id).cmp(&(b.first_span(), &b.id)));
    hs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryReason, NodeId, Span};

    fn topic(i: usize) -> NodeId {
        NodeId::new(ElementKind::Topic, &format!("t{i}"))
    }

    fn edge(session: &str, nodes: &[usize]) -> Hyperedge {
        let span = Span::new(session, 1, 1);
        Hyperedge {
            id: Hyperedge::derive_id(std::slice::from_ref(&span)),
            persons: Default::default(),
            times: Default::default(),
            locations: Default::default(),
            topics: nodes.iter().map(|&i| topic(i)).collect(),
            description: format!("desc {session}"),
            reasons: vec![BoundaryReason::TopicShift],
            provenance: vec![span],
        }
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&edge("a", &[1, 2, 3]), &edge("b", &[2, 3, 4])), 0.5);
        assert_eq!(jaccard(&edge("a", &[1, 2]), &edge("b", &[1, 2])), 1.0);
        assert_eq!(jaccard(&edge("a", &[1]), &edge("b", &[2])), 0.0);
    }

    #[test]
    fn jaccard_is_field_aware() {
        // same canonical name under different kinds is a different node
        let mut a = edge("a", &[1]);
        let mut b = edge("b", &[1]);
        a.persons.insert(NodeId::new(ElementKind::Person, "x"));
        b.locations.insert(NodeId::new(ElementKind::Location, "x"));
        assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_identical_edges_collapse() {
        let out = merge_fixpoint(vec![edge("s3", &[1, 2]), edge("s1", &[1, 2]), edge("s2", &[1, 2])]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].description, "desc s1 | desc s2 | desc s3");
        assert_eq!(out[0].provenance.len(), 3);
    }

    #[test]
    fn exactly_point_eight_is_not_merged() {
        let a = edge("a", &[1, 2, 3, 4]);
        let b = edge("b", &[1, 2, 3, 4, 5]);
        assert_eq!(jaccard(&a, &b), 0.8);
        assert_eq!(merge_fixpoint(vec![a, b]).len(), 2);
    }

    #[test]
    fn above_point_eight_merges() {
        let a = edge("a", &(1..=9).collect::<Vec<_>>());
        let b = edge("b", &(1..=10).collect::<Vec<_>>());
        assert_eq!(merge_fixpoint(vec![a, b]).len(), 1);
    }
}
