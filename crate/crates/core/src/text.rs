//! Tokenization shared by the mock backends, the stub embedder and the metrics.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "d", "did", "do", "does", "doing", "don", "down", "during",
    "each", "even", "ever", "few", "for", "from", "further", "get", "got", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "hey", "hi", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "ll", "m", "me", "more", "most",
    "my", "myself", "no", "nor", "not", "now", "of", "off", "oh", "ok", "okay", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "re", "really", "s",
    "same", "she", "should", "so", "some", "such", "t", "than", "that", "the", "their", "theirs",
    "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "us", "ve", "very", "was", "we", "were", "what", "when",
    "where", "which", "while", "who", "whom", "why", "will", "with", "would", "yeah", "yes",
    "you", "your", "yours", "yourself", "yourselves", "wow", "lot", "much", "many", "thing",
    "things", "think", "know", "sure", "well", "like", "went", "go", "going", "one", "way",
    // temporal vocabulary is indexed through time nodes, not topics
    "today", "yesterday", "tomorrow", "tonight", "morning", "afternoon", "evening", "night",
    "week", "weeks", "month", "months", "year", "years", "day", "days", "ago", "last", "later",
    "next", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
];

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercased alphanumeric runs, in order of appearance.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Words that carry content: not stopwords, not purely numeric, at least two characters.
pub fn content_words(text: &str) -> Vec<String> {
    words(text)
        .into_iter()
        .filter(|w| is_content_word(w))
        .collect()
}

pub fn is_content_word(w: &str) -> bool {
    w.chars().count() >= 2 && !is_stopword(w) && !w.chars().all(|c| c.is_ascii_digit())
}

pub fn content_set(text: &str) -> HashSet<String> {
    content_words(text).into_iter().collect()
}

/// Whitespace-token count used for the offline token ledger.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Jaccard similarity of two string sets; two empty sets count as identical.
pub fn set_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Case-insensitive substring test.
pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_words_drop_stopwords_and_numbers() {
        assert_eq!(
            content_words("I had lunch at KFC in 2023, it's great!"),
            vec!["lunch", "kfc", "great"]
        );
    }

    #[test]
    fn jaccard_of_empty_sets_is_one() {
        assert_eq!(set_jaccard(&HashSet::new(), &HashSet::new()), 1.0);
    }
}
