//! Text embeddings and cosine similarity.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

use crate::llm::{BackendConfig, ChatClient, LlmError};
use crate::text::{content_words, words};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub unit_norm: bool,
}

impl Embedding {
    /// L2-normalize `values`; the zero vector stays zero and is not flagged.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|x| *x /= norm);
        }
        Embedding { values, unit_norm: norm > 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding configuration: {0}")]
    Config(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding request failed: {0}")]
    Remote(#[from] LlmError),
    #[error("embedding cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

/// Cosine similarity in [-1, 1]; 0 when either vector is zero.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine mapped to [0, 1].
pub fn similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    Ok((1.0 + cosine(a, b)?) / 2.0)
}

pub trait Embedder: Send + Sync {
    /// Provider and model identity, used as the cache namespace.
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Signed-hash bag-of-words embedding over content words.
#[derive(Debug, Clone, PartialEq)]
pub struct HashEmbedder {
    pub dim: usize,
    /// Add hashed bigrams so that word order changes the vector.
    pub order_sensitive: bool,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 256, order_sensitive: false }
    }
}

impl HashEmbedder {
    fn add(&self, v: &mut [f64], feature: &str) {
        let h = fnv1a(feature.as_bytes());
        let idx = (h % self.dim as u64) as usize;
        v[idx] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-{}{}", self.dim, if self.order_sensitive { "-ordered" } else { "" })
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut tokens = content_words(text);
        if tokens.is_empty() {
            tokens = words(text);
        }
        if tokens.is_empty() {
            tokens = vec![text.to_lowercase()];
        }
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            self.add(&mut v, t);
        }
        if self.order_sensitive {
            for pair in tokens.windows(2) {
                self.add(&mut v, &format!("{}\u{1}{}", pair[0], pair[1]));
            }
        }
        Ok(Embedding::normalized(v))
    }
}

/// Embeddings endpoint of an OpenAI-compatible provider.
pub struct RemoteEmbedder {
    client: Arc<ChatClient>,
    model: String,
    dim: OnceLock<usize>,
}

impl RemoteEmbedder {
    pub fn new(config: &BackendConfig, model: &str) -> Result<Self, LlmError> {
        Ok(RemoteEmbedder { client: Arc::new(ChatClient::new(config)?), model: model.to_string(), dim: OnceLock::new() })
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}-{}", self.client.config().endpoint, self.model)
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let values = self.client.embed(&self.model, text)?;
        let dim = *self.dim.get_or_init(|| values.len());
        if values.len() != dim {
            return Err(EmbedError::DimensionMismatch(dim, values.len()));
        }
        Ok(Embedding::normalized(values))
    }
}

/// In-process memo plus an optional content-addressed directory cache keyed
/// by sha256 of (provider id, text).
pub struct CachedEmbedder<E> {
    inner: E,
    dir: Option<PathBuf>,
    memo: Mutex<HashMap<String, Embedding>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, dir: Option<PathBuf>) -> Self {
        CachedEmbedder { inner, dir, memo: Mutex::new(HashMap::new()) }
    }

    fn key(&self, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.inner.id().as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let key = self.key(text);
        if let Some(e) = self.memo.lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let path = self.path(&key);
        if let Some(p) = &path {
            if let Ok(bytes) = std::fs::read(p) {
                match serde_json::from_slice::<Embedding>(&bytes) {
                    Ok(e) => {
                        self.memo.lock().unwrap().insert(key, e.clone());
                        return Ok(e);
                    }
                    Err(err) => log::warn!("ignoring corrupt cache entry {}: {err}", p.display()),
                }
            }
        }
        let e = self.inner.embed(text)?;
        if let Some(p) = path {
            let cache_err = |m: std::io::Error| EmbedError::Cache { path: p.clone(), message: m.to_string() };
            std::fs::create_dir_all(p.parent().expect("cache path has a parent")).map_err(cache_err)?;
            let tmp = p.with_extension(format!("tmp{}", std::process::id()));
            std::fs::write(&tmp, serde_json::to_vec(&e).expect("embedding serializes")).map_err(cache_err)?;
            std::fs::rename(&tmp, &p).map_err(cache_err)?;
        }
        self.memo.lock().unwrap().insert(key, e.clone());
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Hash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub order_sensitive: bool,
    pub model: String,
    /// Endpoint override; defaults to the LLM endpoint.
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: EmbeddingKind::Hash,
            dim: 256,
            order_sensitive: false,
            model: "text-embedding-3-small".into(),
            endpoint: None,
            api_key_env: None,
        }
    }
}

/// Build the configured provider, wrapped in the cache.
pub fn build_embedder(
    config: &EmbeddingConfig,
    llm: &BackendConfig,
    cache_dir: Option<PathBuf>,
) -> Result<Arc<dyn Embedder>, EmbedError> {
    match config.kind {
        EmbeddingKind::Hash => {
            if config.dim == 0 {
                return Err(EmbedError::Config("dim must be >= 1".into()));
            }
            let e = HashEmbedder { dim: config.dim, order_sensitive: config.order_sensitive };
            Ok(Arc::new(CachedEmbedder::new(e, None)))
        }
        EmbeddingKind::Remote => {
            let mut c = llm.clone();
            if let Some(ep) = &config.endpoint {
                c.endpoint = ep.clone();
            }
            if let Some(k) = &config.api_key_env {
                c.api_key_env = k.clone();
            }
            Ok(Arc::new(CachedEmbedder::new(RemoteEmbedder::new(&c, &config.model)?, cache_dir)))
        }
    }
}
