//! Layered configuration: built-in defaults, then the TOML file, then
//! `BGMEM_<SECTION>_<KEY>` environment variables, then command-line flags.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use bgmem_core::embedding::{EmbeddingConfig, EmbeddingKind};
use bgmem_core::eval::EvalOptions;
use bgmem_core::llm::{BackendConfig, BackendKind};
use bgmem_core::retrieval::{RerankConfig, RetrievalConfig, Selection, StopPolicyConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const ENV_PREFIX: &str = "BGMEM_";

/// Top-level tables, in file order.
pub const SECTIONS: [&str; 7] = ["llm", "embedding", "stop", "rerank", "eval", "paths", "serve"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Ask the judge model about every answer.
    pub judge: bool,
    /// Replace adaptive stopping with a fixed top-k cut.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { judge: true, top_k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Where `ingest` writes one snapshot per conversation.
    pub snapshot_dir: PathBuf,
    /// Where `eval` and `sweep` write their reports.
    pub out_dir: PathBuf,
    /// Directory cache for remote embeddings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Every LLM request and response is written here when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_dir: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { snapshot_dir: "memory".into(), out_dir: "results".into(), cache_dir: None, trace_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { bind: "127.0.0.1:8080".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub llm: BackendConfig,
    pub embedding: EmbeddingConfig,
    pub stop: StopPolicyConfig,
    pub rerank: RerankConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
    pub serve: ServeConfig,
}

impl AppConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.llm.validate().map_err(|e| format!("[llm] {e}"))?;
        self.stop.validate().map_err(|e| format!("[stop] {e}"))?;
        self.rerank.validate().map_err(|e| format!("[rerank] {e}"))?;
        if self.embedding.kind == EmbeddingKind::Hash && self.embedding.dim == 0 {
            return Err("[embedding] dim must be >= 1".into());
        }
        if self.eval.top_k == Some(0) {
            return Err("[eval] top_k must be >= 1".into());
        }
        self.serve
            .bind
            .parse::<SocketAddr>()
            .map_err(|_| format!("[serve] bind {:?} is not a socket address such as 127.0.0.1:8080", self.serve.bind))?;
        Ok(())
    }

    pub fn retrieval(&self) -> RetrievalConfig {
        RetrievalConfig {
            stop: self.stop.clone(),
            rerank: self.rerank.clone(),
            selection: self.eval.top_k.map_or(Selection::Adaptive, Selection::TopK),
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { retrieval: self.retrieval(), judge: self.eval.judge }
    }

    /// Point both the LLM and the embedding provider at the offline or the
    /// remote implementation.
    pub fn set_backend(&mut self, kind: BackendKind) {
        self.llm.kind = kind;
        self.embedding.kind = match kind {
            BackendKind::Mock => EmbeddingKind::Hash,
            BackendKind::Remote => EmbeddingKind::Remote,
        };
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Defaults with every optional key filled in; lists every key the file accepts.
    pub fn example() -> AppConfig {
        let mut c = AppConfig::default();
        c.embedding.endpoint = Some("https://api.openai.com/v1".into());
        c.embedding.api_key_env = Some("OPENAI_API_KEY".into());
        c.eval.top_k = Some(20);
        c.paths.cache_dir = Some("cache/embeddings".into());
        c.paths.trace_dir = Some("llm-trace".into());
        c
    }
}

/// Every settable key as `section.key`.
pub fn keys() -> Vec<String> {
    let t = Table::try_from(AppConfig::example()).expect("config serializes to a table");
    SECTIONS
        .iter()
        .flat_map(|s| {
            let sec = t[*s].as_table().expect("sections are tables");
            sec.keys().map(move |k| format!("{s}.{k}")).collect::<Vec<_>>()
        })
        .collect()
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Interpret `raw` with the type of the key's current value; keys without a
/// current value take a TOML literal, or a plain string.
fn typed(current: Option<&Value>, raw: &str, key: &str) -> Result<Value, String> {
    let bad = |what: &str| format!("{key} expects {what}, got {raw:?}");
    Ok(match current {
        Some(Value::String(_)) => Value::String(raw.to_string()),
        Some(Value::Integer(_)) => Value::Integer(raw.trim().parse().map_err(|_| bad("an integer"))?),
        Some(Value::Float(_)) => Value::Float(raw.trim().parse().map_err(|_| bad("a number"))?),
        Some(Value::Boolean(_)) => Value::Boolean(raw.trim().parse().map_err(|_| bad("true or false"))?),
        _ => match toml::from_str::<Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
            Err(_) => Value::String(raw.to_string()),
        },
    })
}

fn set(tree: &mut Table, section: &str, key: &str, raw: &str) -> Result<(), String> {
    let name = format!("{section}.{key}");
    let sec = match tree.get_mut(section) {
        Some(Value::Table(t)) => t,
        _ => return Err(format!("unknown config section {section:?}; expected one of {}", SECTIONS.join(", "))),
    };
    let v = typed(sec.get(key), raw, &name)?;
    sec.insert(key.to_string(), v);
    Ok(())
}

/// Split `BGMEM_STOP_LAMBDA_KNEE` into ("stop", "lambda_knee").
pub fn env_key(var: &str) -> Option<(&'static str, String)> {
    let rest = var.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
    SECTIONS.iter().find_map(|s| {
        let key = rest.strip_prefix(s)?.strip_prefix('_')?;
        (!key.is_empty()).then(|| (*s, key.to_string()))
    })
}

/// The four layers. `overrides` are `section.key=value` strings in flag order.
#[derive(Debug, Default, Clone)]
pub struct Layers<'a> {
    pub file: Option<&'a Path>,
    pub env: Vec<(String, String)>,
    pub overrides: Vec<String>,
}

impl Layers<'_> {
    /// Environment variables of the current process carrying the prefix.
    pub fn process_env() -> Vec<(String, String)> {
        std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
    }
}

pub fn load(layers: &Layers<'_>) -> Result<AppConfig, String> {
    let mut tree = Table::try_from(AppConfig::default()).map_err(|e| e.to_string())?;
    if let Some(p) = layers.file {
        let text = std::fs::read_to_string(p).map_err(|e| format!("config file {}: {e}", p.display()))?;
        let file: Table = toml::from_str(&text).map_err(|e| format!("config file {}: {e}", p.display()))?;
        merge(&mut tree, file);
    }
    let mut env: Vec<&(String, String)> = layers.env.iter().collect();
    env.sort();
    for (var, raw) in env {
        match env_key(var) {
            Some((section, key)) => set(&mut tree, section, &key, raw).map_err(|e| format!("{var}: {e}"))?,
            None => log::warn!("ignoring {var}: not of the form {ENV_PREFIX}<SECTION>_<KEY>"),
        }
    }
    for o in &layers.overrides {
        let (k, raw) = o.split_once('=').ok_or_else(|| format!("--set {o:?}: expected section.key=value"))?;
        let (section, key) = k.trim().split_once('.').ok_or_else(|| format!("--set {o:?}: expected section.key=value"))?;
        set(&mut tree, section, key, raw).map_err(|e| format!("--set {o:?}: {e}"))?;
    }
    let cfg: AppConfig = serde_path_to_error::deserialize(Value::Table(tree)).map_err(|e| {
        let path = e.path().to_string();
        format!("config key {path}: {}", e.into_inner())
    })?;
    Ok(cfg)
}
