//! OpenAI-compatible chat-completions and embeddings client, and the
//! mock/remote backend switch used by every LLM-backed operation.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_backoff_secs: f64,
    pub max_in_flight: usize,
    /// Sessions longer than this (whitespace tokens) are rejected rather than chunked.
    pub context_limit_tokens: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 2,
            retry_backoff_secs: 1.0,
            max_in_flight: 4,
            context_limit_tokens: 96_000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.timeout_secs > 0.0) {
            return Err(LlmError::Config(format!("timeout_secs must be > 0, got {}", self.timeout_secs)));
        }
        if !(self.retry_backoff_secs >= 0.0) {
            return Err(LlmError::Config("retry_backoff_secs must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, body: String, attempts: u32 },
    #[error("response failed validation after {attempts} attempt(s): {message}")]
    Schema { message: String, raw: String, attempts: u32 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }

    pub fn add(&mut self, other: TokenUsage) {
        self.prompt += other.prompt;
        self.completion += other.completion;
    }

    /// Whitespace-token approximation used by the offline backends.
    pub fn approx(prompt: &str, completion: &str) -> Self {
        TokenUsage {
            prompt: crate::text::count_tokens(prompt) as u64,
            completion: crate::text::count_tokens(completion) as u64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub content: String,
    pub usage: TokenUsage,
}

/// Counting semaphore capping requests in flight.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(u16, String),
    Transport(String),
}

pub struct ChatClient {
    agent: ureq::Agent,
    config: BackendConfig,
    api_key: Option<String>,
    gate: Gate,
    structured_output: AtomicBool,
    trace_dir: Option<PathBuf>,
    trace_seq: AtomicU64,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl ChatClient {
    /// Build a client, reading the API key from the configured environment
    /// variable. A missing key is only an error for non-local endpoints.
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let local = config.endpoint.contains("127.0.0.1") || config.endpoint.contains("localhost");
        if api_key.is_none() && !local {
            return Err(LlmError::MissingApiKey(config.api_key_env.clone()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ChatClient {
            agent,
            config: config.clone(),
            api_key,
            gate: Gate::new(config.max_in_flight),
            structured_output: AtomicBool::new(true),
            trace_dir: None,
            trace_seq: AtomicU64::new(0),
        })
    }

    /// Log every request and response body under `dir`.
    pub fn with_trace_dir(mut self, dir: PathBuf) -> Self {
        self.trace_dir = Some(dir);
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn trace(&self, seq: u64, label: &str, body: &str) {
        if let Some(dir) = &self.trace_dir {
            let _ = std::fs::create_dir_all(dir);
            let path = dir.join(format!("{seq:06}-{label}.json"));
            if let Err(e) = std::fs::write(&path, body) {
                log::warn!("could not write LLM trace {}: {e}", path.display());
            }
        }
    }

    fn post_once(&self, path: &str, body: &Value) -> Attempt {
        let _slot = self.gate.acquire();
        let mut req = self.agent.post(&self.url(path)).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send(body.to_string()) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                match resp.body_mut().read_to_string() {
                    Ok(text) => Attempt::Done(status, text),
                    Err(e) => Attempt::Transport(e.to_string()),
                }
            }
            Err(e) => Attempt::Transport(e.to_string()),
        }
    }

    /// POST with retries on transport failures, 429 and 5xx.
    fn post(&self, path: &str, body: &Value) -> Result<(String, u32), LlmError> {
        let seq = self.trace_seq.fetch_add(1, Ordering::Relaxed);
        self.trace(seq, "request", &serde_json::to_string_pretty(body).unwrap_or_default());
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = self.post_once(path, body);
            let retryable = match &outcome {
                Attempt::Transport(_) => true,
                Attempt::Done(status, _) => *status == 429 || *status >= 500,
            };
            if !retryable || attempts > self.config.max_retries {
                return match outcome {
                    Attempt::Done(status, text) => {
                        self.trace(seq, "response", &text);
                        if (200..300).contains(&status) {
                            Ok((text, attempts))
                        } else {
                            Err(LlmError::Http { status, body: text, attempts })
                        }
                    }
                    Attempt::Transport(message) => Err(LlmError::Transport { message, attempts }),
                };
            }
            let wait = self.config.retry_backoff_secs * f64::from(1u32 << (attempts - 1).min(6));
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }

    /// One chat completion. With `schema`, structured JSON output is requested
    /// through `response_format`; if the provider rejects that field the
    /// client falls back to instruction-only JSON for the rest of its life.
    pub fn chat(&self, prompt: &str, schema: Option<(&str, &Value)>) -> Result<Completion, LlmError> {
        let mut body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let structured = schema.is_some() && self.structured_output.load(Ordering::Relaxed);
        if let (true, Some((name, schema))) = (structured, schema) {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {"name": name, "schema": schema, "strict": false},
            });
        }
        let text = match self.post("chat/completions", &body) {
            Err(LlmError::Http { status: 400, body: err, .. }) if structured && err.contains("response_format") => {
                log::warn!("provider rejected response_format; falling back to instruction-only JSON");
                self.structured_output.store(false, Ordering::Relaxed);
                body.as_object_mut().unwrap().remove("response_format");
                self.post("chat/completions", &body)?.0
            }
            other => other?.0,
        };
        parse_chat_response(&text)
    }

    /// Chat, then validate the reply with `parse`; invalid replies are
    /// re-requested up to `max_retries` times.
    pub fn request_json<T>(
        &self,
        prompt: &str,
        schema_name: &str,
        schema: &Value,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<(T, TokenUsage), LlmError> {
        let mut usage = TokenUsage::default();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let completion = self.chat(prompt, Some((schema_name, schema)))?;
            usage.add(completion.usage);
            match parse(strip_code_fence(&completion.content)) {
                Ok(v) => return Ok((v, usage)),
                Err(message) if attempts > self.config.max_retries => {
                    return Err(LlmError::Schema { message, raw: completion.content, attempts })
                }
                Err(message) => log::warn!("invalid {schema_name} response (attempt {attempts}): {message}"),
            }
        }
    }

    /// Plain-text completion.
    pub fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        self.chat(prompt, None)
    }

    pub fn embed(&self, model: &str, text: &str) -> Result<Vec<f64>, LlmError> {
        let body = json!({"model": model, "input": text});
        let (raw, attempts) = self.post("embeddings", &body)?;
        let v: Value = serde_json::from_str(&raw).map_err(|e| LlmError::Schema {
            message: e.to_string(),
            raw: raw.clone(),
            attempts,
        })?;
        v["data"][0]["embedding"]
            .as_array()
            .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| LlmError::Schema { message: "missing data[0].embedding".into(), raw, attempts })
    }
}

fn parse_chat_response(text: &str) -> Result<Completion, LlmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LlmError::Schema {
        message: format!("chat response is not JSON: {e}"),
        raw: text.to_string(),
        attempts: 1,
    })?;
    let content = v["choices"][0]["message"]["content"].as_str().ok_or_else(|| LlmError::Schema {
        message: "missing choices[0].message.content".into(),
        raw: text.to_string(),
        attempts: 1,
    })?;
    let usage = TokenUsage {
        prompt: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(Completion { content: content.to_string(), usage })
}

/// Accept replies wrapped in a Markdown code fence.
pub fn strip_code_fence(s: &str) -> &str {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        if let Some(inner) = rest.strip_suffix("```") {
            return inner.trim();
        }
    }
    t
}

/// Which implementation answers the LLM-backed operations.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Deterministic rule-based stand-ins.
    Mock,
    Remote(Arc<ChatClient>),
}

impl Backend {
    pub fn from_config(config: &BackendConfig, trace_dir: Option<PathBuf>) -> Result<Self, LlmError> {
        match config.kind {
            BackendKind::Mock => Ok(Backend::Mock),
            BackendKind::Remote => {
                let mut client = ChatClient::new(config)?;
                if let Some(dir) = trace_dir {
                    client = client.with_trace_dir(dir);
                }
                Ok(Backend::Remote(Arc::new(client)))
            }
        }
    }

    pub fn is_mock(&self) -> bool {
        matches!(self, Backend::Mock)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(BackendConfig::default().validate().is_ok());
        let bad = BackendConfig { timeout_secs: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn code_fences_are_stripped() {
        assert_eq!(strip_code_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fence(" {} "), "{}");
    }

    #[test]
    fn chat_response_parsing() {
        let c = parse_chat_response(
            r#"{"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#,
        )
        .unwrap();
        assert_eq!(c.content, "hi");
        assert_eq!(c.usage.total(), 4);
        assert!(parse_chat_response("{}").is_err());
    }
}
