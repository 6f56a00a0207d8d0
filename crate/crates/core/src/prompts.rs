//! Versioned prompt assets and the JSON schemas sent as structured-output
//! response formats.

use serde_json::{json, Value};

pub const BOUNDARY_EXTRACTION: &str = include_str!("../prompts/boundary_extraction.v1.txt");
pub const TOPIC_CLUSTERING: &str = include_str!("../prompts/topic_clustering.v1.txt");
pub const QUERY_ANALYSIS: &str = include_str!("../prompts/query_analysis.v1.txt");
pub const ANSWER: &str = include_str!("../prompts/answer.v1.txt");
pub const JUDGE: &str = include_str!("../prompts/judge.v1.txt");

pub const PROMPT_VERSION: &str = "v1";

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter()
        .fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{{{k}}}}}"), v))
}

pub fn boundary_extraction(session_text: &str) -> String {
    fill(BOUNDARY_EXTRACTION, &[("session", session_text)])
}

pub fn topic_clustering(topics: &[String]) -> String {
    let list = serde_json::to_string(topics).expect("string list serializes");
    fill(TOPIC_CLUSTERING, &[("topics", &list)])
}

pub fn query_analysis(query: &str) -> String {
    fill(QUERY_ANALYSIS, &[("query", query)])
}

pub fn answer(context: &str, query: &str) -> String {
    fill(ANSWER, &[("context", context), ("query", query)])
}

pub fn judge(question: &str, gold: &str, prediction: &str) -> String {
    fill(JUDGE, &[("question", question), ("gold", gold), ("prediction", prediction)])
}

fn mentions_schema() -> Value {
    json!({
        "type": "array",
        "items": {
            "type": "object",
            "properties": {"turn": {"type": "integer", "minimum": 1}, "mention": {"type": "string"}},
            "required": ["turn", "mention"]
        }
    })
}

fn string_list() -> Value {
    json!({"type": "array", "items": {"type": "string"}})
}

pub fn boundary_extraction_schema() -> Value {
    json!({
        "type": "object",
        "properties": {
            "persons": {"type": "array", "items": {"type": "object", "properties": {
                "canonical_name": {"type": "string"}, "role_tags": string_list(), "mentions": mentions_schema()
            }, "required": ["canonical_name", "mentions"]}},
            "times": {"type": "array", "items": {"type": "object", "properties": {
                "timestamp": {"type": "string"},
                "granularity": {"enum": ["second", "minute", "hour", "day", "week", "month", "year", "approx"]},
                "mentions": mentions_schema()
            }, "required": ["timestamp", "granularity", "mentions"]}},
            "locations": {"type": "array", "items": {"type": "object", "properties": {
                "name": {"type": "string"}, "mentions": mentions_schema()
            }, "required": ["name", "mentions"]}},
            "topics": {"type": "array", "items": {"type": "object", "properties": {
                "label": {"type": "string"}, "mentions": mentions_schema()
            }, "required": ["label", "mentions"]}},
            "boundary_memories": {"type": "array", "items": {"type": "object", "properties": {
                "person_list": string_list(),
                "time_list": string_list(),
                "location_list": string_list(),
                "topic_list": string_list(),
                "description": {"type": "string"},
                "boundary": {"type": "object", "properties": {
                    "reasons": {"type": "array", "items": {"enum": [
                        "change_time", "change_location", "change_place", "change_person", "topic_shift", "explicit_marker"
                    ]}},
                    "start_turn": {"type": "integer"},
                    "end_turn": {"type": "integer"}
                }, "required": ["reasons", "start_turn", "end_turn"]}
            }, "required": ["person_list", "time_list", "location_list", "topic_list", "description", "boundary"]}}
        },
        "required": ["persons", "times", "locations", "topics", "boundary_memories"]
    })
}

pub fn topic_clustering_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"common_topics": string_list(), "rare_topics": string_list()},
        "required": ["common_topics", "rare_topics"],
        "additionalProperties": false
    })
}

pub fn query_analysis_schema() -> Value {
    json!({
        "type": "object",
        "properties": {
            "query_type": {"enum": ["recall", "precision", "judgement"]},
            "constraints": {
                "type": "object",
                "properties": {
                    "person": string_list(),
                    "location": string_list(),
                    "topic": string_list(),
                    "time": {"type": "array", "items": {"type": "object", "properties": {
                        "timestamp": {"type": "string"},
                        "granularity": {"enum": ["year", "month", "day", "hour", "minute", "approx"]}
                    }, "required": ["timestamp", "granularity"]}}
                },
                "additionalProperties": false
            },
            "priority": {"type": "array", "items": {"enum": ["person", "location", "topic", "time"]}}
        },
        "required": ["query_type", "constraints", "priority"],
        "additionalProperties": false
    })
}

pub fn judge_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"rationale": {"type": "string"}, "label": {"enum": ["CORRECT", "WRONG"]}},
        "required": ["rationale", "label"]
    })
}
