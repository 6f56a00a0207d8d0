use serde::{Deserialize, Serialize};

use crate::fmt::sig9;
use crate::model::LongTermMemory;

/// Node and hyperedge counts of one memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub persons: usize,
    pub times: usize,
    pub locations: usize,
    pub topics: usize,
    pub hyperedges: usize,
}

impl MemoryStats {
    pub fn of(memory: &LongTermMemory) -> Self {
        MemoryStats {
            persons: memory.nodes.person.len(),
            times: memory.nodes.time.len(),
            locations: memory.nodes.location.len(),
            topics: memory.nodes.topic.len(),
            hyperedges: memory.hyperedges.len(),
        }
    }
}

/// Per-conversation averages over a set of memories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstructionStats {
    pub conversations: usize,
    #[serde(serialize_with = "sig9")]
    pub avg_persons: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_times: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_locations: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_topics: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_hyperedges: f64,
}

impl ConstructionStats {
    pub fn from_stats(stats: &[MemoryStats]) -> Self {
        let n = stats.len();
        if n == 0 {
            return ConstructionStats::default();
        }
        let avg = |f: fn(&MemoryStats) -> usize| stats.iter().map(f).sum::<usize>() as f64 / n as f64;
        ConstructionStats {
            conversations: n,
            avg_persons: avg(|s| s.persons),
            avg_times: avg(|s| s.times),
            avg_locations: avg(|s| s.locations),
            avg_topics: avg(|s| s.topics),
            avg_hyperedges: avg(|s| s.hyperedges),
        }
    }
}
