//! End-to-end evaluation over a dataset.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Category, Conversation, Dataset, DatasetStats, QAItem};
use super::judge::judge_answer;
use super::metrics::{bleu1, normalize_tokens, token_f1};
use crate::embedding::Embedder;
use crate::fmt::{sig9, sig9_opt, sig9_vec};
use crate::llm::{Backend, TokenUsage};
use crate::memory::{ConstructionStats, MemoryStats};
use crate::model::{LongTermMemory, QueryType};
use crate::pipeline::ingest;
use crate::retrieval::{answer, retrieve, Index, RetrievalConfig, Selection};
use crate::text::count_tokens;

pub const SCORER_VERSION: &str = "token-f1-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub retrieval: RetrievalConfig,
    /// Ask the judge about every answer.
    pub judge: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { retrieval: RetrievalConfig::default(), judge: true }
    }
}

/// Memory built for one conversation.
#[derive(Debug, Clone)]
pub struct BuiltConversation {
    pub id: String,
    pub memory: Result<LongTermMemory, String>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub conversation_id: String,
    pub index: usize,
    pub category: Category,
    pub question: String,
    pub gold_answer: String,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_type: Option<QueryType>,
    pub candidates: usize,
    pub selected: Vec<String>,
    /// ξ̂ of the ranked candidates, best first.
    #[serde(serialize_with = "sig9_vec")]
    pub ranked_scores: Vec<f64>,
    pub context_tokens: u64,
    pub plan_tokens: u64,
    pub answer_tokens: u64,
    /// plan_tokens + answer_tokens.
    pub question_tokens: u64,
    #[serde(serialize_with = "sig9")]
    pub f1: f64,
    #[serde(serialize_with = "sig9")]
    pub bleu1: f64,
    /// Adversarial items: which option the prediction was mapped to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_choice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_error: Option<String>,
    pub judge_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub questions: usize,
    #[serde(serialize_with = "sig9")]
    pub f1: f64,
    #[serde(serialize_with = "sig9")]
    pub bleu1: f64,
    /// Fraction judged correct, over questions with a verdict.
    #[serde(serialize_with = "sig9_opt")]
    pub judge: Option<f64>,
    pub judge_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    /// Mean over questions.
    #[serde(serialize_with = "sig9")]
    pub f1_micro: f64,
    /// Mean over categories present.
    #[serde(serialize_with = "sig9")]
    pub f1_macro: f64,
    #[serde(serialize_with = "sig9")]
    pub bleu1: f64,
    #[serde(serialize_with = "sig9_opt")]
    pub judge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub construction: u64,
    pub questions: u64,
    pub context: u64,
    pub answers: u64,
    /// construction + questions.
    pub total: u64,
    /// Judge calls, kept outside the total.
    pub judge: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer_version: String,
    /// "complete", or "partial" when any question failed.
    pub status: String,
    pub failures: usize,
    pub options: EvalOptions,
    pub dataset: DatasetStats,
    pub construction: ConstructionStats,
    pub categories: BTreeMap<Category, CategoryScore>,
    pub overall: Overall,
    pub tokens: TokenLedger,
    pub records: Vec<QuestionRecord>,
}

/// Extract, consolidate and cluster every conversation.
pub fn build_memories(dataset: &Dataset, backend: &Backend) -> Vec<BuiltConversation> {
    dataset
        .conversations
        .par_iter()
        .map(|c| match ingest(&LongTermMemory::new(), &c.sessions, backend) {
            Ok((memory, report)) => BuiltConversation { id: c.id.clone(), memory: Ok(memory), usage: report.usage },
            Err(e) => {
                log::error!("conversation {}: {e}", c.id);
                BuiltConversation { id: c.id.clone(), memory: Err(e.to_string()), usage: TokenUsage::default() }
            }
        })
        .collect()
}

/// Map a prediction to one of the two adversarial options by containment.
pub fn adversarial_choice(prediction: &str, options: &(String, String)) -> &'static str {
    let p = normalize_tokens(prediction).join(" ");
    let contains = |o: &str| {
        let o = normalize_tokens(o).join(" ");
        !o.is_empty() && format!(" {p} ").contains(&format!(" {o} "))
    };
    let not_mentioned = contains(&options.1) || p.contains("not mentioned") || p.contains("no information");
    match (not_mentioned, contains(&options.0)) {
        (true, false) => "not_mentioned",
        (false, true) => "adversarial",
        (true, true) => "both",
        (false, false) => "none",
    }
}

fn blank_record(conv: &Conversation, i: usize, q: &QAItem) -> QuestionRecord {
    QuestionRecord {
        conversation_id: conv.id.clone(),
        index: i,
        category: q.category,
        question: q.question.clone(),
        gold_answer: q.gold_answer.clone(),
        prediction: String::new(),
        query_type: None,
        candidates: 0,
        selected: Vec::new(),
        ranked_scores: Vec::new(),
        context_tokens: 0,
        plan_tokens: 0,
        answer_tokens: 0,
        question_tokens: 0,
        f1: 0.0,
        bleu1: 0.0,
        adversarial_choice: None,
        judge_correct: None,
        judge_error: None,
        judge_tokens: 0,
        error: None,
    }
}

fn score(rec: &mut QuestionRecord, q: &QAItem) {
    rec.bleu1 = bleu1(&rec.prediction, &q.gold_answer);
    rec.f1 = match &q.adversarial_options {
        Some(opts) => {
            let choice = adversarial_choice(&rec.prediction, opts);
            rec.adversarial_choice = Some(choice.to_string());
            if choice == "not_mentioned" { 1.0 } else { 0.0 }
        }
        None => token_f1(&rec.prediction, &q.gold_answer),
    };
}

fn evaluate_question(
    conv: &Conversation,
    i: usize,
    q: &QAItem,
    index: Option<&Index<'_>>,
    backend: &Backend,
    opts: &EvalOptions,
) -> QuestionRecord {
    let mut rec = blank_record(conv, i, q);
    let outcome = index.ok_or_else(|| "memory construction failed".to_string()).and_then(|idx| {
        let r = retrieve(&q.question, idx, backend, &opts.retrieval).map_err(|e| e.to_string())?;
        let (a, usage) = answer(&r, idx.memory, backend).map_err(|e| e.to_string())?;
        Ok((r, a, usage))
    });
    match outcome {
        Ok((r, a, usage)) => {
            rec.query_type = Some(r.plan.query_type);
            rec.candidates = r.ranked.len();
            rec.ranked_scores = r.ranked.iter().map(|c| c.updated_score).collect();
            rec.context_tokens = count_tokens(&r.context) as u64;
            rec.plan_tokens = r.usage.total();
            rec.answer_tokens = usage.total();
            rec.selected = r.selected;
            rec.prediction = a;
        }
        Err(e) => rec.error = Some(e),
    }
    rec.question_tokens = rec.plan_tokens + rec.answer_tokens;
    score(&mut rec, q);
    if opts.judge && rec.error.is_none() {
        match judge_answer(&q.question, &q.gold_answer, &rec.prediction, backend) {
            Ok((v, u)) => {
                rec.judge_correct = Some(v.correct);
                rec.judge_tokens = u.total();
            }
            Err(e) => rec.judge_error = Some(e.to_string()),
        }
    }
    rec
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

fn judge_rate<'a>(rs: impl Iterator<Item = &'a QuestionRecord> + Clone) -> Option<f64> {
    let verdicts: Vec<bool> = rs.filter_map(|r| r.judge_correct).collect();
    (!verdicts.is_empty()).then(|| verdicts.iter().filter(|v| **v).count() as f64 / verdicts.len() as f64)
}

/// Aggregate per-question records into a report.
pub fn assemble(
    dataset: &Dataset,
    built: &[BuiltConversation],
    opts: &EvalOptions,
    records: Vec<QuestionRecord>,
) -> EvalReport {
    let mut categories = BTreeMap::new();
    for c in Category::ALL {
        let rs: Vec<&QuestionRecord> = records.iter().filter(|r| r.category == c).collect();
        if rs.is_empty() {
            continue;
        }
        categories.insert(
            c,
            CategoryScore {
                questions: rs.len(),
                f1: mean(rs.iter().map(|r| r.f1)),
                bleu1: mean(rs.iter().map(|r| r.bleu1)),
                judge: judge_rate(rs.iter().copied()),
                judge_errors: rs.iter().filter(|r| r.judge_error.is_some()).count(),
            },
        );
    }
    let overall = Overall {
        f1_micro: mean(records.iter().map(|r| r.f1)),
        f1_macro: mean(categories.values().map(|c| c.f1)),
        bleu1: mean(records.iter().map(|r| r.bleu1)),
        judge: judge_rate(records.iter()),
    };
    let construction: u64 = built.iter().map(|b| b.usage.total()).sum();
    let questions: u64 = records.iter().map(|r| r.question_tokens).sum();
    let tokens = TokenLedger {
        construction,
        questions,
        context: records.iter().map(|r| r.context_tokens).sum(),
        answers: records.iter().map(|r| r.answer_tokens).sum(),
        total: construction + questions,
        judge: records.iter().map(|r| r.judge_tokens).sum(),
    };
    let stats: Vec<MemoryStats> = built.iter().filter_map(|b| b.memory.as_ref().ok()).map(MemoryStats::of).collect();
    let failures = records.iter().filter(|r| r.error.is_some()).count() + built.iter().filter(|b| b.memory.is_err()).count();
    EvalReport {
        scorer_version: SCORER_VERSION.to_string(),
        status: if failures == 0 { "complete" } else { "partial" }.to_string(),
        failures,
        options: opts.clone(),
        dataset: dataset.stats(),
        construction: ConstructionStats::from_stats(&stats),
        categories,
        overall,
        tokens,
        records,
    }
}

/// Answer and score every question against already built memories.
pub fn evaluate(
    dataset: &Dataset,
    built: &[BuiltConversation],
    backend: &Backend,
    embedder: &dyn Embedder,
    opts: &EvalOptions,
) -> EvalReport {
    let mut records = Vec::new();
    for (conv, b) in dataset.conversations.iter().zip(built) {
        let index = match &b.memory {
            Ok(m) => match Index::build(m, embedder) {
                Ok(i) => Some(i),
                Err(e) => {
                    log::error!("conversation {}: {e}", conv.id);
                    None
                }
            },
            Err(_) => None,
        };
        let recs: Vec<QuestionRecord> = conv
            .qa
            .par_iter()
            .enumerate()
            .map(|(i, q)| evaluate_question(conv, i, q, index.as_ref(), backend, opts))
            .collect();
        records.extend(recs);
    }
    assemble(dataset, built, opts, records)
}

pub fn run_eval(dataset: &Dataset, backend: &Backend, embedder: &dyn Embedder, opts: &EvalOptions) -> EvalReport {
    let built = build_memories(dataset, backend);
    evaluate(dataset, &built, backend, embedder, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    LambdaKnee,
    PrecisionScale,
    JudgmentScale,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "lambda_knee" => Some(SweepParam::LambdaKnee),
            "precision_scale" => Some(SweepParam::PrecisionScale),
            "judgment_scale" | "judgement_scale" => Some(SweepParam::JudgmentScale),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::LambdaKnee => "lambda_knee",
            SweepParam::PrecisionScale => "precision_scale",
            SweepParam::JudgmentScale => "judgment_scale",
        }
    }

    pub fn apply(self, cfg: &mut RetrievalConfig, value: f64) {
        match self {
            SweepParam::LambdaKnee => cfg.stop.lambda_knee = value,
            SweepParam::PrecisionScale => cfg.stop.precision_scale = value,
            SweepParam::JudgmentScale => cfg.stop.judgment_scale = value,
        }
    }
}

/// Parse `name=v1,v2,...` or `name=a..b[:step]`; a range without a step
/// has five evenly spaced points.
pub fn parse_sweep(arg: &str) -> Result<(SweepParam, Vec<f64>), String> {
    let (name, grid) = arg.split_once('=').ok_or_else(|| format!("sweep {arg:?} is not of the form name=values"))?;
    let param = SweepParam::parse(name.trim())
        .ok_or_else(|| format!("unknown sweep parameter {name:?}; expected lambda_knee, precision_scale or judgment_scale"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number"));
    let values = if let Some((a, rest)) = grid.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, Some(num(s)?)),
            None => (num(rest)?, None),
        };
        let a = num(a)?;
        if !(a <= b) {
            return Err(format!("empty range {a}..{b}"));
        }
        match step {
            Some(s) if s > 0.0 => {
                let n = ((b - a) / s + 1e-9).floor() as usize;
                (0..=n).map(|i| crate::fmt::round9(a + s * i as f64)).collect()
            }
            Some(_) => return Err("sweep step must be > 0".into()),
            None if a == b => vec![a],
            None => (0..5).map(|i| crate::fmt::round9(a + (b - a) * i as f64 / 4.0)).collect(),
        }
    } else {
        grid.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(format!("sweep grid for {} is empty", param.as_str()));
    }
    Ok((param, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    #[serde(serialize_with = "sig9")]
    pub value: f64,
    #[serde(serialize_with = "sig9")]
    pub f1_micro: f64,
    #[serde(serialize_with = "sig9")]
    pub avg_selected: f64,
    pub selected_total: usize,
    pub context_tokens: u64,
    pub question_tokens: u64,
}

/// Evaluate once per grid value, reusing the built memories.
pub fn sweep(
    dataset: &Dataset,
    built: &[BuiltConversation],
    backend: &Backend,
    embedder: &dyn Embedder,
    base: &EvalOptions,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>, String> {
    values
        .iter()
        .map(|&v| {
            let mut opts = base.clone();
            opts.judge = false;
            param.apply(&mut opts.retrieval, v);
            opts.retrieval.validate()?;
            let r = evaluate(dataset, built, backend, embedder, &opts);
            let selected_total: usize = r.records.iter().map(|x| x.selected.len()).sum();
            Ok(SweepRow {
                parameter: param,
                value: v,
                f1_micro: r.overall.f1_micro,
                avg_selected: mean(r.records.iter().map(|x| x.selected.len() as f64)),
                selected_total,
                context_tokens: r.tokens.context,
                question_tokens: r.tokens.questions,
            })
        })
        .collect()
}

/// Options for the fixed top-k baseline.
pub fn top_k_options(base: &EvalOptions, k: usize) -> EvalOptions {
    let mut o = base.clone();
    o.retrieval.selection = Selection::TopK(k);
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::NOT_MENTIONED;

    #[test]
    fn adversarial_mapping() {
        let opts = ("a red bicycle".to_string(), NOT_MENTIONED.to_string());
        assert_eq!(adversarial_choice("Not mentioned in the conversation.", &opts), "not_mentioned");
        assert_eq!(adversarial_choice("She bought a red bicycle", &opts), "adversarial");
        assert_eq!(adversarial_choice("blue", &opts), "none");
    }

    #[test]
    fn sweep_grammar() {
        assert_eq!(parse_sweep("precision_scale=0.5..0.9:0.1").unwrap().1, [0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(parse_sweep("lambda_knee=0.02,0.1,0.3").unwrap().1, [0.02, 0.1, 0.3]);
        assert_eq!(parse_sweep("judgment_scale=0.5..0.9").unwrap().1.len(), 5);
        assert!(parse_sweep("precision_scale=").is_err());
        assert!(parse_sweep("precision_scale=0.9..0.5").is_err());
        assert!(parse_sweep("beta=0.1").is_err());
    }
}
