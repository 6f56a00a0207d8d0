//! Benchmark file loading.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::extractor::{Session, Turn};
use crate::fmt::sig9;
use crate::retrieval::NOT_MENTIONED;
use crate::text::count_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SingleHop,
    MultiHop,
    Temporal,
    OpenDomain,
    Adversarial,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::SingleHop, Category::MultiHop, Category::Temporal, Category::OpenDomain, Category::Adversarial];

    /// Numeric tags used by the benchmark file.
    pub fn from_tag(tag: u64) -> Option<Category> {
        match tag {
            1 => Some(Category::MultiHop),
            2 => Some(Category::Temporal),
            3 => Some(Category::OpenDomain),
            4 => Some(Category::SingleHop),
            5 => Some(Category::Adversarial),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SingleHop => "single_hop",
            Category::MultiHop => "multi_hop",
            Category::Temporal => "temporal",
            Category::OpenDomain => "open_domain",
            Category::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub question: String,
    pub gold_answer: String,
    pub category: Category,
    /// (adversarial answer, "Not mentioned in the conversation"); adversarial items only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_options: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub sessions: Vec<Session>,
    pub qa: Vec<QAItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub conversations: Vec<Conversation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub conversations: usize,
    pub sessions: usize,
    pub turns: usize,
    pub questions: usize,
    #[serde(serialize_with = "sig9")]
    pub avg_sessions: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_turns: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_tokens: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_questions: f64,
    pub questions_by_category: BTreeMap<Category, usize>,
}

impl Dataset {
    pub fn stats(&self) -> DatasetStats {
        let n = self.conversations.len();
        let sessions: usize = self.conversations.iter().map(|c| c.sessions.len()).sum();
        let turns: usize = self.conversations.iter().flat_map(|c| &c.sessions).map(|s| s.turns.len()).sum();
        let tokens: usize = self
            .conversations
            .iter()
            .flat_map(|c| &c.sessions)
            .flat_map(|s| &s.turns)
            .map(|t| count_tokens(&t.text))
            .sum();
        let questions: usize = self.conversations.iter().map(|c| c.qa.len()).sum();
        let mut by_cat = BTreeMap::new();
        for q in self.conversations.iter().flat_map(|c| &c.qa) {
            *by_cat.entry(q.category).or_insert(0) += 1;
        }
        let avg = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        DatasetStats {
            conversations: n,
            sessions,
            turns,
            questions,
            avg_sessions: avg(sessions),
            avg_turns: avg(turns),
            avg_tokens: avg(tokens),
            avg_questions: avg(questions),
            questions_by_category: by_cat,
        }
    }
}

/// "1:56 pm on 8 May, 2023" → "2023-05-08T13:56:00". ISO input passes through.
pub fn parse_session_datetime(raw: &str) -> Option<String> {
    let s = raw.trim();
    if let Some((_, t)) = crate::model::time::parse_loose(s) {
        return Some(t.format("%Y-%m-%dT%H:%M:%S").to_string());
    }
    let cleaned = s.replace(',', "");
    ["%I:%M %p on %d %B %Y", "%I:%M %p on %d %b %Y", "%H:%M on %d %B %Y"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(&cleaned, f).ok())
        .map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string())
}

fn err(path: &str, message: impl Into<String>) -> EvalError {
    EvalError::Dataset { path: path.to_string(), message: message.into() }
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_turns(v: &Value, path: &str) -> Result<Vec<Turn>, EvalError> {
    let arr = v.as_array().ok_or_else(|| err(path, "expected an array of turns"))?;
    let mut turns = Vec::new();
    for (i, t) in arr.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let speaker = t.get("speaker").and_then(Value::as_str).ok_or_else(|| err(&p, "missing string field \"speaker\""))?;
        let mut text = t.get("text").and_then(Value::as_str).unwrap_or("").trim().to_string();
        if let Some(caption) = t.get("blip_caption").and_then(Value::as_str) {
            if !caption.trim().is_empty() {
                text = format!("{text} [shares a photo of {}]", caption.trim()).trim().to_string();
            }
        }
        if text.is_empty() || speaker.trim().is_empty() {
            log::warn!("{p}: skipping a turn without speaker or text");
            continue;
        }
        turns.push(Turn { turn: turns.len() as u32 + 1, speaker: speaker.trim().to_string(), text });
    }
    Ok(turns)
}

fn parse_conversation(v: &Value, idx: usize) -> Result<Conversation, EvalError> {
    let root = format!("[{idx}]");
    let id = v.get("sample_id").and_then(text_of).unwrap_or_else(|| format!("conv-{}", idx + 1));
    let conv = v.get("conversation").ok_or_else(|| err(&root, "missing object \"conversation\""))?;
    let obj = conv.as_object().ok_or_else(|| err(&format!("{root}.conversation"), "expected an object"))?;
    let mut numbers: Vec<u32> = obj
        .keys()
        .filter_map(|k| k.strip_prefix("session_")?.parse::<u32>().ok())
        .collect();
    numbers.sort_unstable();
    let mut sessions = Vec::new();
    for n in numbers {
        let key = format!("session_{n}");
        let p = format!("{root}.conversation.{key}");
        let date_key = format!("{key}_date_time");
        let raw_date = obj
            .get(&date_key)
            .and_then(Value::as_str)
            .ok_or_else(|| err(&format!("{root}.conversation.{date_key}"), "missing session date"))?;
        let dt = parse_session_datetime(raw_date)
            .ok_or_else(|| err(&format!("{root}.conversation.{date_key}"), format!("unrecognized datetime {raw_date:?}")))?;
        let turns = parse_turns(&obj[&key], &p)?;
        if turns.is_empty() {
            log::warn!("{p}: empty session skipped");
            continue;
        }
        sessions.push(Session { session_id: key, session_datetime: dt, turns });
    }
    let qa_val = v.get("qa").ok_or_else(|| err(&root, "missing array \"qa\""))?;
    let qa_arr = qa_val.as_array().ok_or_else(|| err(&format!("{root}.qa"), "expected an array"))?;
    let mut qa = Vec::with_capacity(qa_arr.len());
    for (i, q) in qa_arr.iter().enumerate() {
        let p = format!("{root}.qa[{i}]");
        let question = q.get("question").and_then(Value::as_str).ok_or_else(|| err(&p, "missing string field \"question\""))?;
        let tag = q.get("category").and_then(Value::as_u64).ok_or_else(|| err(&p, "missing integer field \"category\""))?;
        let category = Category::from_tag(tag).ok_or_else(|| err(&format!("{p}.category"), format!("unknown category tag {tag}")))?;
        let evidence = q
            .get("evidence")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(text_of).collect())
            .unwrap_or_default();
        let (gold_answer, adversarial_options) = if category == Category::Adversarial {
            let adv = q
                .get("adversarial_answer")
                .or_else(|| q.get("answer"))
                .and_then(text_of)
                .ok_or_else(|| err(&p, "adversarial item without \"adversarial_answer\""))?;
            (NOT_MENTIONED.to_string(), Some((adv, NOT_MENTIONED.to_string())))
        } else {
            let gold = q.get("answer").and_then(text_of).ok_or_else(|| err(&p, "missing field \"answer\""))?;
            (gold, None)
        };
        qa.push(QAItem { question: question.to_string(), gold_answer, category, adversarial_options, evidence });
    }
    Ok(Conversation { id, sessions, qa })
}

pub fn parse_locomo(text: &str) -> Result<Dataset, EvalError> {
    let v: Value = serde_json::from_str(text).map_err(|e| EvalError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
    let arr = v.as_array().ok_or_else(|| err("$", "expected a top-level array of conversations"))?;
    let conversations = arr.iter().enumerate().map(|(i, c)| parse_conversation(c, i)).collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { conversations })
}

pub fn load_locomo(path: &Path) -> Result<Dataset, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_locomo(&text)
}
