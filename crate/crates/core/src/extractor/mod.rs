//! Session → boundary memory extraction.

pub(crate) mod mock;
mod relative_time;
mod schema;

pub use mock::{mock_extract, Rulebook};
pub use relative_time::resolve_relative_time;
pub use schema::{
    parse_extraction, to_boundary_memory, Conversion, ExtractionResponse, WireBoundary, WireLocation, WireMention,
    WirePerson, WireSegment, WireTime, WireTopic,
};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Backend, LlmError, TokenUsage};
use crate::model::time::parse_loose;
use crate::model::BoundaryMemory;
use crate::prompts;
use crate::text::count_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn: u32,
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    /// ISO-8601 datetime of the session.
    pub session_datetime: String,
    pub turns: Vec<Turn>,
}

impl Session {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let bad = |m: String| Err(ExtractError::InvalidSession { session_id: self.session_id.clone(), message: m });
        if self.turns.is_empty() {
            return bad("no turns".into());
        }
        self.anchor()?;
        for (i, t) in self.turns.iter().enumerate() {
            if t.turn != i as u32 + 1 {
                return bad(format!("turn {} at position {}; turns must be numbered 1, 2, ...", t.turn, i + 1));
            }
            if t.speaker.trim().is_empty() || t.text.trim().is_empty() {
                return bad(format!("turn {} has an empty speaker or text", t.turn));
            }
        }
        Ok(())
    }

    /// The session datetime, the anchor for relative time expressions.
    pub fn anchor(&self) -> Result<NaiveDateTime, ExtractError> {
        parse_loose(&self.session_datetime).map(|(_, t)| t).ok_or_else(|| ExtractError::InvalidSession {
            session_id: self.session_id.clone(),
            message: format!("session_datetime {:?} is not ISO-8601", self.session_datetime),
        })
    }

    /// `Speaker: text` for one turn.
    pub fn line(&self, turn: u32) -> Option<String> {
        let t = self.turns.get((turn as usize).checked_sub(1)?)?;
        Some(format!("{}: {}", t.speaker, t.text))
    }

    /// Transcript as sent to the extraction prompt.
    pub fn render(&self) -> String {
        let mut out = format!("Session {} | datetime {}\n", self.session_id, self.session_datetime);
        for t in &self.turns {
            out.push_str(&format!("[turn {}] {}: {}\n", t.turn, t.speaker, t.text));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("session {session_id}: {message}")]
    InvalidSession { session_id: String, message: String },
    #[error("session {session_id}: prompt of ~{tokens} tokens exceeds the context limit of {limit}")]
    ContextLimit { session_id: String, tokens: usize, limit: usize },
    #[error("session {session_id}: {source}")]
    Llm { session_id: String, source: LlmError },
    #[error("session {session_id}: rule-based extraction produced an invalid response: {message}")]
    Mock { session_id: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub response: ExtractionResponse,
    pub memory: BoundaryMemory,
    pub usage: TokenUsage,
    /// Repairs and downgraded mention-fidelity violations.
    pub warnings: Vec<String>,
}

/// Extract the boundary memory of one session.
pub fn extract_boundaries(session: &Session, backend: &Backend) -> Result<Extraction, ExtractError> {
    extract_with(session, backend, &Rulebook::default())
}

pub fn extract_with(session: &Session, backend: &Backend, rules: &Rulebook) -> Result<Extraction, ExtractError> {
    session.validate()?;
    let prompt = prompts::boundary_extraction(&session.render());
    let sid = || session.session_id.clone();
    match backend {
        Backend::Mock => {
            let response = mock_extract(session, rules);
            let raw = serde_json::to_string(&response).expect("response serializes");
            let mock_err = |message: String| ExtractError::Mock { session_id: sid(), message };
            let parsed = parse_extraction(&raw).map_err(mock_err)?;
            let c = to_boundary_memory(&parsed, session).map_err(mock_err)?;
            if let Some(v) = c.fidelity_violations.first() {
                return Err(mock_err(v.clone()));
            }
            Ok(Extraction { response, memory: c.memory, usage: TokenUsage::approx(&prompt, &raw), warnings: c.repairs })
        }
        Backend::Remote(client) => {
            let limit = client.config().context_limit_tokens;
            let tokens = count_tokens(&prompt);
            if tokens > limit {
                return Err(ExtractError::ContextLimit { session_id: sid(), tokens, limit });
            }
            let ((response, c), usage) = client
                .request_json(&prompt, "boundary_extraction", &prompts::boundary_extraction_schema(), |raw| {
                    let r = parse_extraction(raw)?;
                    let c = to_boundary_memory(&r, session)?;
                    Ok((r, c))
                })
                .map_err(|source| ExtractError::Llm { session_id: sid(), source })?;
            let mut warnings = c.repairs;
            warnings.extend(c.fidelity_violations);
            for w in &warnings {
                log::warn!("session {}: {w}", session.session_id);
            }
            Ok(Extraction { response, memory: c.memory, usage, warnings })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_boundary_memory, BoundaryReason};

    fn one_turn() -> Session {
        Session {
            session_id: "s1".into(),
            session_datetime: "2023-05-08T13:56:00".into(),
            turns: vec![Turn { turn: 1, speaker: "Caroline".into(), text: "Hi!".into() }],
        }
    }

    #[test]
    fn single_turn_session() {
        let e = extract_boundaries(&one_turn(), &Backend::Mock).unwrap();
        assert_eq!(e.memory.hyperedges.len(), 1);
        assert_eq!(e.memory.hyperedges[0].reasons, [BoundaryReason::ExplicitMarker]);
        assert!(!e.memory.hyperedges[0].topics.is_empty());
        assert!(validate_boundary_memory(&e.memory).is_empty());
    }

    #[test]
    fn empty_and_misnumbered_sessions_are_rejected() {
        let mut s = one_turn();
        s.turns.clear();
        assert!(matches!(extract_boundaries(&s, &Backend::Mock), Err(ExtractError::InvalidSession { .. })));
        let mut s = one_turn();
        s.turns[0].turn = 2;
        assert!(extract_boundaries(&s, &Backend::Mock).is_err());
    }
}
