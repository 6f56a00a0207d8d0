//! Deterministic rule-based extraction.
//!
//! A new segment starts at a turn that
//! - brings a third speaker into the segment, or names a new companion ("with Mel"): `change_person`
//! - carries a temporal cue resolving to a time not yet in the segment: `change_time`
//! - carries a location cue ("at the gym", "at KFC", "in Paris") new to the segment: `change_location`
//! - shares too few content words with the preceding window: `topic_shift`
//! - contains a transition phrase ("anyway", "by the way"): `explicit_marker`
//!
//! The first segment of a session is opened by the session start itself and
//! carries `explicit_marker`.

use chrono::NaiveDateTime;
use std::collections::{BTreeMap, HashSet};

use super::relative_time::{is_supported, resolve_relative_time};
use super::schema::{
    ExtractionResponse, WireBoundary, WireLocation, WireMention, WirePerson, WireSegment, WireTime, WireTopic,
};
use super::Session;
use crate::model::{BoundaryReason, TimeGranularity};
use crate::text::{is_content_word, is_stopword, set_jaccard};

#[derive(Debug, Clone, PartialEq)]
pub struct Rulebook {
    /// Content-word Jaccard below which adjacent windows count as a topic shift.
    pub topic_shift_threshold: f64,
    /// Turns per comparison window.
    pub topic_window: usize,
    /// Transition phrases, lowercase.
    pub markers: Vec<String>,
}

impl Default for Rulebook {
    fn default() -> Self {
        Rulebook {
            topic_shift_threshold: 0.2,
            topic_window: 1,
            markers: ["anyway", "anyways", "by the way", "btw", "speaking of", "on another note", "on a different note", "changing the subject", "different topic"]
                .map(String::from)
                .to_vec(),
        }
    }
}

pub(crate) const NOT_PLACES: &[&str] = &[
    "moment", "time", "times", "end", "beginning", "start", "least", "first", "all", "once", "home", "work",
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december", "i",
];

/// A word of a turn with its byte range in the original text.
#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub(crate) start: usize,
    pub(crate) end: usize,
    pub(crate) lower: String,
    pub(crate) capitalized: bool,
}

pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (start, c.is_alphanumeric()) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                let w = &text[s..i];
                out.push(Token {
                    start: s,
                    end: i,
                    lower: w.to_lowercase(),
                    capitalized: w.chars().next().is_some_and(char::is_uppercase),
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn surface(text: &str, toks: &[Token]) -> String {
    text[toks[0].start..toks[toks.len() - 1].end].to_string()
}

struct TimeCue {
    surface: String,
    timestamp: String,
    granularity: TimeGranularity,
}

fn time_cues(text: &str, toks: &[Token], anchor: NaiveDateTime) -> Vec<TimeCue> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let hit = (1..=3).rev().find(|&len| {
            i + len <= toks.len() && {
                let phrase: Vec<&str> = toks[i..i + len].iter().map(|t| t.lower.as_str()).collect();
                is_supported(&phrase.join(" "), anchor)
            }
        });
        match hit {
            Some(len) => {
                let s = surface(text, &toks[i..i + len]);
                let (timestamp, granularity) = resolve_relative_time(&s, anchor);
                out.push(TimeCue { surface: s, timestamp, granularity });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Run of up to `max` tokens after position `i` satisfying `pred`.
fn run(toks: &[Token], i: usize, max: usize, pred: impl Fn(&Token) -> bool) -> &[Token] {
    let n = toks[i..].iter().take(max).take_while(|t| pred(t)).count();
    &toks[i..i + n]
}

fn proper(t: &Token, speakers: &HashSet<String>) -> bool {
    t.capitalized && !NOT_PLACES.contains(&t.lower.as_str()) && !is_stopword(&t.lower) && !speakers.contains(&t.lower)
}

pub(crate) fn location_cues(text: &str, toks: &[Token], speakers: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..toks.len() {
        let word = toks[i].lower.as_str();
        if word != "at" && word != "in" || i + 1 >= toks.len() {
            continue;
        }
        let name = if word == "at" && toks[i + 1].lower == "the" && i + 2 < toks.len() {
            // one head word, extended only by capitalized words ("at the Golden Gate Bridge")
            let head = &toks[i + 2];
            let ok = head.lower.chars().all(char::is_alphabetic)
                && !is_stopword(&head.lower)
                && !NOT_PLACES.contains(&head.lower.as_str());
            if !ok {
                &toks[i + 2..i + 2]
            } else if head.capitalized {
                run(toks, i + 2, 3, |t| proper(t, speakers))
            } else {
                &toks[i + 2..i + 3]
            }
        } else {
            run(toks, i + 1, 3, |t| proper(t, speakers))
        };
        if !name.is_empty() {
            let s = surface(text, name);
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

fn companion_cues(text: &str, toks: &[Token], speakers: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..toks.len() {
        if toks[i].lower == "with" && i + 1 < toks.len() {
            let name = run(toks, i + 1, 2, |t| proper(t, speakers));
            if !name.is_empty() {
                out.push(surface(text, name));
            }
        }
    }
    out
}

fn has_marker(toks: &[Token], markers: &[String]) -> bool {
    let joined = format!(" {} ", toks.iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" "));
    markers.iter().any(|m| joined.contains(&format!(" {m} ")))
}

struct TurnInfo {
    turn: u32,
    speaker: String,
    toks: Vec<Token>,
    content: HashSet<String>,
    times: Vec<TimeCue>,
    locations: Vec<String>,
    companions: Vec<String>,
    marker: bool,
}

#[derive(Default)]
struct Segment {
    start: usize,
    end: usize,
    reasons: Vec<BoundaryReason>,
    speakers: Vec<String>,
    persons: Vec<String>,
    times: Vec<String>,
    locations: Vec<String>,
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x.to_lowercase() == s.to_lowercase()) {
        v.push(s.to_string());
    }
}

fn window(infos: &[TurnInfo], from: usize, to: usize) -> HashSet<String> {
    infos[from..to].iter().flat_map(|t| t.content.iter().cloned()).collect()
}

/// Label of a segment: its two most frequent content words, ties broken by
/// first occurrence, with the turn and verbatim surface of each word's first
/// occurrence. Falls back to any word, then to the first speaker.
fn label(session: &Session, infos: &[TurnInfo], speakers: &HashSet<String>) -> (String, Vec<WireMention>) {
    for content_only in [true, false] {
        let mut counts: BTreeMap<&str, (usize, usize, u32, String)> = BTreeMap::new();
        let mut order = 0;
        for info in infos {
            let text = &session.turns[info.turn as usize - 1].text;
            for t in &info.toks {
                if speakers.contains(&t.lower) || (content_only && !is_content_word(&t.lower)) {
                    continue;
                }
                let e = counts.entry(&t.lower).or_insert_with(|| {
                    order += 1;
                    (0, order, info.turn, text[t.start..t.end].to_string())
                });
                e.0 += 1;
            }
        }
        if counts.is_empty() {
            continue;
        }
        let mut ranked: Vec<_> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        ranked.truncate(2);
        let label = ranked.iter().map(|(w, _)| *w).collect::<Vec<_>>().join(" ");
        let mentions = ranked.into_iter().map(|(_, (_, _, turn, s))| WireMention { turn, mention: s }).collect();
        return (label, mentions);
    }
    let first = &infos[0];
    (first.speaker.to_lowercase(), vec![WireMention { turn: first.turn, mention: first.speaker.clone() }])
}

/// Apply the rulebook to a session. Fully deterministic.
pub fn mock_extract(session: &Session, rules: &Rulebook) -> ExtractionResponse {
    let anchor = session.anchor().unwrap_or_default();
    let speakers: HashSet<String> = session.turns.iter().map(|t| t.speaker.to_lowercase()).collect();
    let infos: Vec<TurnInfo> = session
        .turns
        .iter()
        .map(|t| {
            let toks = tokenize(&t.text);
            let content = toks
                .iter()
                .filter(|w| is_content_word(&w.lower) && !speakers.contains(&w.lower))
                .map(|w| w.lower.clone())
                .collect();
            TurnInfo {
                turn: t.turn,
                speaker: t.speaker.clone(),
                content,
                times: time_cues(&t.text, &toks, anchor),
                locations: location_cues(&t.text, &toks, &speakers),
                companions: companion_cues(&t.text, &toks, &speakers),
                marker: has_marker(&toks, &rules.markers),
                toks,
            }
        })
        .collect();

    let w = rules.topic_window.max(1);
    let mut segments: Vec<Segment> = Vec::new();
    for (i, info) in infos.iter().enumerate() {
        let reasons = match segments.last() {
            None => vec![BoundaryReason::ExplicitMarker],
            Some(seg) => {
                let mut r = Vec::new();
                let lc = |v: &[String], s: &str| v.iter().any(|x| x.eq_ignore_ascii_case(s));
                let new_speaker = !lc(&seg.speakers, &info.speaker) && seg.speakers.len() >= 2;
                if new_speaker || info.companions.iter().any(|c| !lc(&seg.persons, c)) {
                    r.push(BoundaryReason::ChangePerson);
                }
                if info.times.iter().any(|t| !seg.times.contains(&t.timestamp)) {
                    r.push(BoundaryReason::ChangeTime);
                }
                if info.locations.iter().any(|l| !lc(&seg.locations, l)) {
                    r.push(BoundaryReason::ChangeLocation);
                }
                let (before, after) = (window(&infos, i.saturating_sub(w), i), window(&infos, i, (i + w).min(infos.len())));
                if !before.is_empty() && !after.is_empty() && set_jaccard(&before, &after) < rules.topic_shift_threshold {
                    r.push(BoundaryReason::TopicShift);
                }
                if info.marker {
                    r.push(BoundaryReason::ExplicitMarker);
                }
                r
            }
        };
        if !reasons.is_empty() {
            segments.push(Segment { start: i, reasons, ..Default::default() });
        }
        let seg = segments.last_mut().expect("first turn opens a segment");
        seg.end = i;
        push_unique(&mut seg.speakers, &info.speaker);
        push_unique(&mut seg.persons, &info.speaker);
        for c in &info.companions {
            push_unique(&mut seg.persons, c);
        }
        for t in &info.times {
            if !seg.times.contains(&t.timestamp) {
                seg.times.push(t.timestamp.clone());
            }
        }
        for l in &info.locations {
            push_unique(&mut seg.locations, l);
        }
    }

    let mut resp = ExtractionResponse {
        persons: Vec::new(),
        times: Vec::new(),
        locations: Vec::new(),
        topics: Vec::new(),
        boundary_memories: Vec::new(),
        relations: None,
    };
    let mention = |turn: u32, s: &str| WireMention { turn, mention: s.to_string() };
    for info in &infos {
        let mut person = |name: &str| match resp.persons.iter_mut().find(|p| p.canonical_name.eq_ignore_ascii_case(name)) {
            Some(p) => p.mentions.push(mention(info.turn, name)),
            None => resp.persons.push(WirePerson {
                canonical_name: name.to_string(),
                role_tags: Vec::new(),
                mentions: vec![mention(info.turn, name)],
            }),
        };
        person(&info.speaker);
        for c in &info.companions {
            person(c);
        }
        for t in &info.times {
            match resp.times.iter_mut().find(|x| x.timestamp == t.timestamp) {
                Some(x) => x.mentions.push(mention(info.turn, &t.surface)),
                None => resp.times.push(WireTime {
                    timestamp: t.timestamp.clone(),
                    granularity: t.granularity,
                    mentions: vec![mention(info.turn, &t.surface)],
                }),
            }
        }
        for l in &info.locations {
            match resp.locations.iter_mut().find(|x| x.name.eq_ignore_ascii_case(l)) {
                Some(x) => x.mentions.push(mention(info.turn, l)),
                None => resp.locations.push(WireLocation { name: l.clone(), mentions: vec![mention(info.turn, l)] }),
            }
        }
    }
    for seg in &segments {
        let turns = &infos[seg.start..=seg.end];
        let (topic, mentions) = label(session, turns, &speakers);
        match resp.topics.iter_mut().find(|t| t.label == topic) {
            Some(t) => t.mentions.extend(mentions),
            None => resp.topics.push(WireTopic { label: topic.clone(), mentions }),
        }
        let description = turns
            .iter()
            .map(|t| session.line(t.turn).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(" ");
        resp.boundary_memories.push(WireSegment {
            person_list: seg.persons.clone(),
            time_list: seg.times.clone(),
            location_list: seg.locations.clone(),
            topic_list: vec![topic],
            description,
            boundary: WireBoundary {
                reasons: seg.reasons.clone(),
                start_turn: turns[0].turn,
                end_turn: turns[turns.len() - 1].turn,
            },
        });
    }
    resp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::Turn;

    fn session(turns: &[(&str, &str)]) -> Session {
        Session {
            session_id: "s1".into(),
            session_datetime: "2023-05-08T13:56:00".into(),
            turns: turns
                .iter()
                .enumerate()
                .map(|(i, (s, t))| Turn { turn: i as u32 + 1, speaker: s.to_string(), text: t.to_string() })
                .collect(),
        }
    }

    #[test]
    fn tokens_keep_byte_ranges() {
        let t = tokenize("Hi, Mel's  café!");
        let words: Vec<&str> = t.iter().map(|t| t.lower.as_str()).collect();
        assert_eq!(words, ["hi", "mel", "s", "café"]);
        assert_eq!(&"Hi, Mel's  café!"[t[3].start..t[3].end], "café");
    }

    #[test]
    fn cues() {
        let sp: HashSet<String> = ["caroline".to_string()].into();
        let text = "Later that evening at the gym with Mel, then dinner at KFC in Central Park";
        let toks = tokenize(text);
        assert_eq!(location_cues(text, &toks, &sp), ["gym", "KFC", "Central Park"]);
        assert_eq!(companion_cues(text, &toks, &sp), ["Mel"]);
        let anchor = session(&[]).anchor().unwrap();
        let t = time_cues(text, &toks, anchor);
        assert_eq!((t[0].surface.as_str(), t[0].timestamp.as_str()), ("Later that evening", "2023-05-08T19"));
        assert!(location_cues("at the moment", &tokenize("at the moment"), &sp).is_empty());
    }

    #[test]
    fn steady_conversation_is_one_segment() {
        let s = session(&[
            ("Caroline", "I painted a sunset painting."),
            ("Mel", "A sunset painting sounds lovely."),
            ("Caroline", "The sunset painting took hours."),
        ]);
        let r = mock_extract(&s, &Rulebook::default());
        assert_eq!(r.boundary_memories.len(), 1);
        let b = &r.boundary_memories[0];
        assert_eq!((b.boundary.start_turn, b.boundary.end_turn), (1, 3));
        assert_eq!(b.boundary.reasons, [BoundaryReason::ExplicitMarker]);
        assert_eq!(b.topic_list, ["sunset painting"]);
    }

    #[test]
    fn disjoint_turns_shift_topic() {
        let s = session(&[("Caroline", "Pottery class was fun."), ("Mel", "Kids love camping trips.")]);
        let r = mock_extract(&s, &Rulebook::default());
        assert_eq!(r.boundary_memories.len(), 2);
        assert_eq!(r.boundary_memories[1].boundary.reasons, [BoundaryReason::TopicShift]);
    }

    #[test]
    fn marker_starts_a_segment() {
        let s = session(&[("Caroline", "Pottery class was fun."), ("Mel", "Anyway, pottery class sounds fun.")]);
        let r = mock_extract(&s, &Rulebook::default());
        assert_eq!(r.boundary_memories[1].boundary.reasons, [BoundaryReason::ExplicitMarker]);
    }
}
