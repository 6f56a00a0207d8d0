use std::collections::HashMap;

use bgmem_core::eval::{bleu1, token_f1};
use bgmem_testkit::gen::{self, noisy_text};

fn tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !"‘’“”".contains(*c))
        .collect();
    cleaned.split_whitespace().filter(|w| !["a", "an", "the"].contains(w)).map(String::from).collect()
}

fn counts(ts: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in ts {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn overlap(p: &[String], g: &[String]) -> usize {
    let gc = counts(g);
    counts(p).iter().map(|(t, n)| (*n).min(*gc.get(t).unwrap_or(&0))).sum()
}

fn f1_oracle(pred: &str, gold: &str) -> f64 {
    let (p, g) = (tokens(pred), tokens(gold));
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let m = overlap(&p, &g) as f64;
    if m == 0.0 {
        return 0.0;
    }
    let (prec, rec) = (m / p.len() as f64, m / g.len() as f64);
    2.0 * prec * rec / (prec + rec)
}

fn bleu_oracle(pred: &str, gold: &str) -> f64 {
    let (p, g) = (tokens(pred), tokens(gold));
    if p.is_empty() {
        return if g.is_empty() { 1.0 } else { 0.0 };
    }
    let prec = overlap(&p, &g) as f64 / p.len() as f64;
    let (c, r) = (p.len() as f64, g.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    prec * bp
}

#[test]
fn hand_computed_values() {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
    assert!(close(token_f1("had lunch at KFC", "lunch at KFC"), 6.0 / 7.0));
    assert!(close(token_f1("7 May 2023", "7 May 2023"), 1.0));
    assert!(close(token_f1("McDonald's", "KFC"), 0.0));
    assert!(close(token_f1("", ""), 1.0));
    assert!(close(token_f1("", "KFC"), 0.0));
    assert!(close(token_f1("The sunset, at the lake!", "a sunset at the lake"), 1.0));

    assert!(close(bleu1("a sunset at the lake", "a sunset at the lake"), 1.0));
    // c = 2, r = 4, both unigrams match: BP = e^(1 - 4/2)
    assert!(close(bleu1("w x", "w x y z"), (-1.0f64).exp()));
    assert!(close(bleu1("dog", "cat"), 0.0));
    // clipping: "cat cat cat" vs "cat" counts one match out of three
    assert!(close(bleu1("cat cat cat", "cat"), 1.0 / 3.0));
}

#[test]
fn random_pairs_match_oracle_and_respect_bounds() {
    let mut rng = gen::rng(99);
    for i in 0..10_000 {
        let (a, b) = (noisy_text(&mut rng), noisy_text(&mut rng));
        let (f, g) = (token_f1(&a, &b), bleu1(&a, &b));
        assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&g), "pair {i}: {a:?} {b:?}");
        assert!((f - f1_oracle(&a, &b)).abs() < 1e-12, "pair {i}: f1 {a:?} {b:?}");
        assert!((g - bleu_oracle(&a, &b)).abs() < 1e-12, "pair {i}: bleu {a:?} {b:?}");
        assert_eq!(f, token_f1(&b, &a), "pair {i}: symmetry");
        assert_eq!(token_f1(&a, &a), 1.0);
    }
}
