//! Test support: straight-line reference implementations that share no code
//! with the library, random instance generators, and a scripted HTTP server.

pub mod gen;
pub mod golden;
pub mod http;
pub mod merge;
pub mod rerank;
pub mod stop;

use std::path::PathBuf;

/// Path of the bundled mini benchmark file.
pub fn mini_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mini_locomo.json")
}
