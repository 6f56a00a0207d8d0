//! Rendering selected hyperedges into the answer context.

use crate::model::{ElementKind, Hyperedge, LongTermMemory};

fn spans(h: &Hyperedge) -> String {
    h.provenance
        .iter()
        .map(|s| {
            if s.start_turn == s.end_turn {
                format!("{} turn {}", s.session_id, s.start_turn)
            } else {
                format!("{} turns {}-{}", s.session_id, s.start_turn, s.end_turn)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// One context line for a hyperedge.
pub fn render_hyperedge(h: &Hyperedge, memory: &LongTermMemory) -> String {
    let elements: Vec<String> = ElementKind::ALL.into_iter().map(|k| memory.names(h, k).join(", ")).collect();
    format!("[{}] {} ({})", spans(h), h.description, elements.join("; "))
}

/// Context block for the ids in `selected`, in the given order. Unknown ids
/// are skipped.
pub fn answer_context(selected: &[String], memory: &LongTermMemory) -> String {
    let lines: Vec<String> = selected
        .iter()
        .filter_map(|id| memory.hyperedge(id))
        .map(|h| render_hyperedge(h, memory))
        .collect();
    let mut out = format!("Retrieved memories ({}):\n", lines.len());
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
