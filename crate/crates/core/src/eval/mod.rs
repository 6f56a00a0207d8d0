//! Benchmark loading, answer metrics and the evaluation driver.

mod dataset;
mod judge;
mod metrics;
mod run;

pub use dataset::{load_locomo, parse_locomo, parse_session_datetime, Category, Conversation, Dataset, DatasetStats, QAItem};
pub use judge::{judge_answer, Verdict};
pub use metrics::{bleu1, normalize_tokens, token_f1};
pub use run::{
    adversarial_choice, assemble, build_memories, evaluate, parse_sweep, run_eval, sweep, top_k_options,
    BuiltConversation, CategoryScore, EvalOptions, EvalReport, Overall, QuestionRecord, SweepParam, SweepRow,
    TokenLedger, SCORER_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("dataset {path}: {message}")]
    Dataset { path: String, message: String },
}
