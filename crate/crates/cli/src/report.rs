//! Report files and terminal tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bgmem_core::eval::{EvalReport, SweepRow};
use bgmem_core::fmt::round9;
use bgmem_core::memory::MemoryStats;
use bgmem_core::retrieval::policy_name;
use serde::Serialize;

#[derive(Serialize)]
struct RecordRow<'a> {
    conversation_id: &'a str,
    index: usize,
    category: &'static str,
    query_type: &'static str,
    candidates: usize,
    selected: usize,
    context_tokens: u64,
    plan_tokens: u64,
    answer_tokens: u64,
    question_tokens: u64,
    f1: f64,
    bleu1: f64,
    judge_correct: Option<bool>,
    adversarial_choice: Option<&'a str>,
    error: Option<&'a str>,
    question: &'a str,
    gold_answer: &'a str,
    prediction: &'a str,
}

#[derive(Serialize)]
struct CategoryRow {
    category: &'static str,
    questions: usize,
    f1: f64,
    bleu1: f64,
    judge: Option<f64>,
}

fn json_file(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_file<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes report.json, records.csv and categories.csv; returns their paths.
pub fn write_eval(dir: &Path, report: &EvalReport) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = vec![dir.join("report.json"), dir.join("records.csv"), dir.join("categories.csv")];
    json_file(&files[0], report)?;
    csv_file(
        &files[1],
        report.records.iter().map(|r| RecordRow {
            conversation_id: &r.conversation_id,
            index: r.index,
            category: r.category.as_str(),
            query_type: r.query_type.map_or("", policy_name),
            candidates: r.candidates,
            selected: r.selected.len(),
            context_tokens: r.context_tokens,
            plan_tokens: r.plan_tokens,
            answer_tokens: r.answer_tokens,
            question_tokens: r.question_tokens,
            f1: round9(r.f1),
            bleu1: round9(r.bleu1),
            judge_correct: r.judge_correct,
            adversarial_choice: r.adversarial_choice.as_deref(),
            error: r.error.as_deref(),
            question: &r.question,
            gold_answer: &r.gold_answer,
            prediction: &r.prediction,
        }),
    )?;
    csv_file(
        &files[2],
        report.categories.iter().map(|(c, s)| CategoryRow {
            category: c.as_str(),
            questions: s.questions,
            f1: round9(s.f1),
            bleu1: round9(s.bleu1),
            judge: s.judge.map(round9),
        }),
    )?;
    Ok(files)
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = rows.first().map_or("sweep", |r| r.parameter.as_str());
    let files = vec![dir.join(format!("sweep_{name}.json")), dir.join(format!("sweep_{name}.csv"))];
    json_file(&files[0], &rows)?;
    #[derive(Serialize)]
    struct Row {
        parameter: &'static str,
        value: f64,
        f1_micro: f64,
        avg_selected: f64,
        selected_total: usize,
        context_tokens: u64,
        question_tokens: u64,
    }
    csv_file(
        &files[1],
        rows.iter().map(|r| Row {
            parameter: r.parameter.as_str(),
            value: round9(r.value),
            f1_micro: round9(r.f1_micro),
            avg_selected: round9(r.avg_selected),
            selected_total: r.selected_total,
            context_tokens: r.context_tokens,
            question_tokens: r.question_tokens,
        }),
    )?;
    Ok(files)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

/// Per-category F1, BLEU-1 and judge accuracy in percent, then the token ledger.
pub fn eval_table(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>9} {:>7} {:>7} {:>7}", "category", "questions", "F1", "BLEU-1", "J");
    for (c, x) in &r.categories {
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>7.2} {:>7.2} {:>7}",
            c.as_str(),
            x.questions,
            100.0 * x.f1,
            100.0 * x.bleu1,
            opt(x.judge)
        );
    }
    let _ = writeln!(
        s,
        "{:<12} {:>9} {:>7.2} {:>7.2} {:>7}",
        "overall",
        r.records.len(),
        100.0 * r.overall.f1_micro,
        100.0 * r.overall.bleu1,
        opt(r.overall.judge)
    );
    let _ = writeln!(s, "macro F1 {:.2}", 100.0 * r.overall.f1_macro);
    let t = &r.tokens;
    let _ = writeln!(
        s,
        "tokens: construction {} + questions {} = {} (context {}, answers {}; judge {} not counted)",
        t.construction, t.questions, t.total, t.context, t.answers, t.judge
    );
    if r.failures > 0 {
        let _ = writeln!(s, "status {} with {} failure(s)", r.status, r.failures);
    }
    s
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let name = rows.first().map_or("value", |r| r.parameter.as_str());
    let _ = writeln!(s, "{:<16} {:>8} {:>12} {:>9} {:>15} {:>16}", name, "F1", "avg selected", "selected", "context tokens", "question tokens");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>8.2} {:>12.3} {:>9} {:>15} {:>16}",
            round9(r.value),
            100.0 * r.f1_micro,
            r.avg_selected,
            r.selected_total,
            r.context_tokens,
            r.question_tokens
        );
    }
    s
}

/// Node and hyperedge counts per conversation, with the average row.
pub fn stats_table(rows: &[(String, usize, MemoryStats)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>8} {:>8} {:>6} {:>9} {:>6} {:>10}",
        "conversation", "sessions", "persons", "times", "locations", "topics", "hyperedges"
    );
    for (id, sessions, m) in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>8} {:>6} {:>9} {:>6} {:>10}",
            id, sessions, m.persons, m.times, m.locations, m.topics, m.hyperedges
        );
    }
    if rows.len() > 1 {
        let n = rows.len() as f64;
        let avg = |f: fn(&MemoryStats) -> usize| rows.iter().map(|r| f(&r.2) as f64).sum::<f64>() / n;
        let _ = writeln!(
            s,
            "{:<16} {:>8.1} {:>8.1} {:>6.1} {:>9.1} {:>6.1} {:>10.1}",
            "average",
            rows.iter().map(|r| r.1 as f64).sum::<f64>() / n,
            avg(|m| m.persons),
            avg(|m| m.times),
            avg(|m| m.locations),
            avg(|m| m.topics),
            avg(|m| m.hyperedges)
        );
    }
    s
}
