pub mod embedding;
pub mod eval;
pub mod extractor;
pub mod fmt;
pub mod llm;
pub mod memory;
pub mod model;
pub mod pipeline;
pub mod prompts;
pub mod retrieval;
pub mod text;
