//! Query analysis: query type, element constraints and priority.

use chrono::NaiveDate;
use std::collections::HashSet;

use super::RetrievalError;
use crate::extractor::mock::{location_cues, tokenize, Token, NOT_PLACES};
use crate::llm::{Backend, TokenUsage};
use crate::model::{Constraints, ElementKind, QueryType, RetrievalPlan, TimeConstraint, TimeGranularity};
use crate::prompts;
use crate::text::{is_content_word, is_stopword};

const RECALL_PHRASES: &[&str] = &[
    "how many", "how often", "how much", "list", "all the", "what kinds", "what kind of", "what types",
    "what type of", "which activities", "what activities", "what are", "what things", "summarize", "summary",
    "everything", "in what ways", "what has", "what have",
];

const AUXILIARIES: &[&str] = &[
    "have", "has", "had", "did", "do", "does", "is", "are", "was", "were", "can", "could", "will", "would",
    "should", "am",
];

const SUBJECTS: &[&str] = &["i", "you", "we", "they", "he", "she", "it"];

/// Question words that carry no topic.
const QUESTION_NOISE: &[&str] = &[
    "enjoy", "like", "likes", "liked", "love", "loves", "happen", "happened", "feel", "felt", "say", "said",
    "tell", "told", "mention", "mentioned", "talk", "talked", "plan", "planned", "think", "kind", "kinds",
    "type", "types", "anything", "something",
];

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december",
];

fn classify(toks: &[Token]) -> QueryType {
    let words: Vec<&str> = toks.iter().map(|t| t.lower.as_str()).collect();
    let joined = format!(" {} ", words.join(" "));
    if RECALL_PHRASES.iter().any(|p| joined.contains(&format!(" {p} "))) {
        return QueryType::Recall;
    }
    // "what <1-3 words> do/does <subject>": a habitual, enumerable answer
    if words.first() == Some(&"what") {
        for gap in 1..=3 {
            if let (Some(aux), Some(subj)) = (words.get(gap + 1), words.get(gap + 2)) {
                if (*aux == "do" || *aux == "does") && (SUBJECTS.contains(subj) || toks[gap + 2].capitalized) {
                    return QueryType::Recall;
                }
            }
        }
    }
    if words.first().is_some_and(|w| AUXILIARIES.contains(w)) {
        return QueryType::Judgement;
    }
    QueryType::Precision
}

fn month_index(w: &str) -> Option<u32> {
    MONTHS.iter().position(|m| *m == w || (w.len() == 3 && m.starts_with(w))).map(|i| i as u32 + 1)
}

fn year(w: &str) -> Option<i32> {
    (w.len() == 4).then(|| w.parse::<i32>().ok()).flatten().filter(|y| (1900..=2100).contains(y))
}

/// Absolute dates: ISO dates, "<day> <Month> <year>", "<Month> <day>, <year>",
/// "<Month> <year>" and bare years.
fn time_constraints(query: &str, toks: &[Token]) -> (Vec<TimeConstraint>, HashSet<usize>) {
    let mut out = Vec::new();
    let mut used = HashSet::new();
    let tc = |timestamp: String, granularity| TimeConstraint { timestamp, granularity };
    for word in query.split(|c: char| c.is_whitespace() || ",;?!()".contains(c)) {
        if let Some((g, t)) = crate::model::time::detect(word.trim_end_matches('.')) {
            if !g.is_approx() && word.contains('-') {
                out.push(tc(g.render(&t), g));
            }
        }
    }
    let w: Vec<&str> = toks.iter().map(|t| t.lower.as_str()).collect();
    let mut i = 0;
    while i < w.len() {
        let day = |s: &str| s.parse::<u32>().ok().filter(|d| (1..=31).contains(d));
        let date = |y: i32, m: u32, d: u32| NaiveDate::from_ymd_opt(y, m, d).map(|x| x.format("%Y-%m-%d").to_string());
        let hit: Option<(usize, TimeConstraint)> =
            match (w.get(i).copied(), w.get(i + 1).copied(), w.get(i + 2).copied()) {
                (Some(d), Some(m), Some(y)) if day(d).is_some() && month_index(m).is_some() && year(y).is_some() => {
                    date(year(y).unwrap(), month_index(m).unwrap(), day(d).unwrap()).map(|s| (3, tc(s, TimeGranularity::Day)))
                }
                (Some(m), Some(d), Some(y)) if month_index(m).is_some() && day(d).is_some() && year(y).is_some() => {
                    date(year(y).unwrap(), month_index(m).unwrap(), day(d).unwrap()).map(|s| (3, tc(s, TimeGranularity::Day)))
                }
                (Some(m), Some(y), _) if month_index(m).is_some() && year(y).is_some() => {
                    let s = format!("{:04}-{:02}", year(y).unwrap(), month_index(m).unwrap());
                    Some((2, tc(s, TimeGranularity::Month)))
                }
                (Some(y), _, _) if year(y).is_some() && !query.contains(&format!("{y}-")) => {
                    Some((1, tc(y.to_string(), TimeGranularity::Year)))
                }
                _ => None,
            };
        match hit {
            Some((n, c)) => {
                used.extend(i..i + n);
                out.push(c);
                i += n;
            }
            None => i += 1,
        }
    }
    out.dedup();
    (out, used)
}

fn push_unique(v: &mut Vec<String>, s: String) {
    if !v.iter().any(|x| x.eq_ignore_ascii_case(&s)) {
        v.push(s);
    }
}

/// Rule-based plan. Classification: enumeration cues → recall, a leading
/// auxiliary verb → judgement, anything else → precision. Constraints come
/// from location phrases, capitalized names, absolute dates and the
/// remaining content words. Priority is time, person, location, topic,
/// restricted to constrained kinds.
pub fn mock_plan(query: &str) -> RetrievalPlan {
    let toks = tokenize(query);
    let query_type = classify(&toks);
    let mut c = Constraints::default();
    let (times, time_tokens) = time_constraints(query, &toks);
    c.time = times;

    let locations = location_cues(query, &toks, &HashSet::new());
    let location_words: HashSet<String> =
        locations.iter().flat_map(|l| tokenize(l).into_iter().map(|t| t.lower)).collect();
    for l in locations {
        push_unique(&mut c.location, l);
    }

    let mut person_words = HashSet::new();
    let mut i = 0;
    while i < toks.len() {
        let name_like = |t: &Token| {
            t.capitalized
                && !is_stopword(&t.lower)
                && !NOT_PLACES.contains(&t.lower.as_str())
                && month_index(&t.lower).is_none()
                && !location_words.contains(&t.lower)
                && !AUXILIARIES.contains(&t.lower.as_str())
        };
        if !name_like(&toks[i]) || time_tokens.contains(&i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < toks.len() && i - start < 3 && name_like(&toks[i]) {
            person_words.insert(toks[i].lower.clone());
            i += 1;
        }
        push_unique(&mut c.person, query[toks[start].start..toks[i - 1].end].to_string());
    }

    for (i, t) in toks.iter().enumerate() {
        if is_content_word(&t.lower)
            && !time_tokens.contains(&i)
            && !person_words.contains(&t.lower)
            && !location_words.contains(&t.lower)
            && !QUESTION_NOISE.contains(&t.lower.as_str())
            && month_index(&t.lower).is_none()
        {
            push_unique(&mut c.topic, t.lower.clone());
        }
    }

    let priority = [ElementKind::Time, ElementKind::Person, ElementKind::Location, ElementKind::Topic]
        .into_iter()
        .filter(|k| c.has(*k))
        .collect();
    RetrievalPlan { query_type, constraints: c, priority }
}

const QUERY_GRANULARITIES: [TimeGranularity; 6] = [
    TimeGranularity::Year,
    TimeGranularity::Month,
    TimeGranularity::Day,
    TimeGranularity::Hour,
    TimeGranularity::Minute,
    TimeGranularity::Approx,
];

/// Parse and validate a query-analysis reply.
pub fn parse_plan(raw: &str) -> Result<RetrievalPlan, String> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let plan: RetrievalPlan = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })?;
    let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    for key in ["constraints", "priority"] {
        if value.get(key).is_none() {
            return Err(format!("missing field `{key}`"));
        }
    }
    for (i, t) in plan.constraints.time.iter().enumerate() {
        if !QUERY_GRANULARITIES.contains(&t.granularity) {
            return Err(format!("constraints.time[{i}].granularity: {} is not allowed in queries", t.granularity));
        }
        if !t.granularity.is_approx() && t.granularity.parse(&t.timestamp).is_none() {
            return Err(format!(
                "constraints.time[{i}].timestamp: {:?} is not ISO-8601 at {} granularity",
                t.timestamp, t.granularity
            ));
        }
    }
    for (kind, list) in [("person", &plan.constraints.person), ("location", &plan.constraints.location), ("topic", &plan.constraints.topic)] {
        if let Some(i) = list.iter().position(|s| s.trim().is_empty()) {
            return Err(format!("constraints.{kind}[{i}]: empty string"));
        }
    }
    if let Some(v) = plan.priority_violation() {
        return Err(format!("priority: {v}"));
    }
    Ok(plan)
}

pub fn generate_plan(query: &str, backend: &Backend) -> Result<(RetrievalPlan, TokenUsage), RetrievalError> {
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    let prompt = prompts::query_analysis(query);
    match backend {
        Backend::Mock => {
            let plan = mock_plan(query);
            let reply = serde_json::to_string(&plan).expect("plan serializes");
            Ok((plan, TokenUsage::approx(&prompt, &reply)))
        }
        Backend::Remote(client) => client
            .request_json(&prompt, "query_analysis", &prompts::query_analysis_schema(), parse_plan)
            .map_err(RetrievalError::Plan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kfc_question() {
        let p = mock_plan("When did Caroline have lunch at KFC?");
        assert_eq!(p.query_type, QueryType::Precision);
        assert_eq!(p.constraints.person, ["Caroline"]);
        assert_eq!(p.constraints.location, ["KFC"]);
        assert_eq!(p.constraints.topic, ["lunch"]);
        assert!(p.constraints.time.is_empty());
        assert_eq!(p.priority, [ElementKind::Person, ElementKind::Location, ElementKind::Topic]);
        assert!(p.priority_violation().is_none());
    }

    #[test]
    fn query_types() {
        assert_eq!(mock_plan("What sports do I enjoy?").query_type, QueryType::Recall);
        assert_eq!(mock_plan("Have I dined with Alex before?").query_type, QueryType::Judgement);
        assert_eq!(mock_plan("Have I dined with Alex before?").constraints.person, ["Alex"]);
        assert_eq!(mock_plan("How many times did Mel go camping?").query_type, QueryType::Recall);
        assert_eq!(mock_plan("What did Caroline paint?").query_type, QueryType::Precision);
    }

    #[test]
    fn absolute_dates() {
        let p = mock_plan("What did Mel do on 8 May 2023 and in June 2022?");
        let ts: Vec<(&str, TimeGranularity)> =
            p.constraints.time.iter().map(|t| (t.timestamp.as_str(), t.granularity)).collect();
        assert_eq!(ts, [("2023-05-08", TimeGranularity::Day), ("2022-06", TimeGranularity::Month)]);
        assert_eq!(p.priority[0], ElementKind::Time);
        let p = mock_plan("What happened on 2023-05-09?");
        assert_eq!(p.constraints.time[0].timestamp, "2023-05-09");
        assert!(p.constraints.topic.is_empty());
    }

    #[test]
    fn remote_plan_validation() {
        let ok = r#"{"query_type":"precision","constraints":{"person":["Caroline"]},"priority":["person"]}"#;
        assert!(parse_plan(ok).is_ok());
        let bad = r#"{"query_type":"precision","constraints":{"person":["Caroline"]},"priority":["time"]}"#;
        assert!(parse_plan(bad).unwrap_err().starts_with("priority"));
        let bad = r#"{"query_type":"lookup","constraints":{},"priority":[]}"#;
        assert!(parse_plan(bad).unwrap_err().starts_with("query_type"));
    }
}
