//! Lexical answer metrics.

use std::collections::HashMap;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, delete punctuation, split on whitespace, drop articles.
pub fn normalize_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !matches!(c, '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}'))
        .collect();
    cleaned.split_whitespace().filter(|w| !ARTICLES.contains(w)).map(str::to_string).collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn overlap(pred: &[String], gold: &[String]) -> usize {
    let g = counts(gold);
    counts(pred).iter().map(|(t, n)| (*n).min(g.get(t).copied().unwrap_or(0))).sum()
}

/// Token-multiset F1. Both empty scores 1, one empty scores 0.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let (p, g) = (normalize_tokens(prediction), normalize_tokens(gold));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let common = overlap(&p, &g);
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Unigram BLEU with clipped counts and brevity penalty.
pub fn bleu1(prediction: &str, gold: &str) -> f64 {
    let (p, g) = (normalize_tokens(prediction), normalize_tokens(gold));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) => return 0.0,
        _ => {}
    }
    let precision = overlap(&p, &g) as f64 / p.len() as f64;
    let (c, r) = (p.len() as f64, g.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * precision
}
