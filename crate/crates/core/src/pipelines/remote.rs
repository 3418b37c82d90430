use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{Backend, BackendError, Completion, CompletionRequest};

fn default_key_env() -> Option<String> {
    Some("OPENAI_API_KEY".into())
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> usize {
    3
}

fn default_backoff() -> u64 {
    500
}

/// Settings for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Recorded as the backend id; defaults to the model name.
    pub id: Option<String>,
    pub model: String,
    /// Base URL up to and including the version segment, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    /// Environment variable holding the bearer token; `None` sends no auth header.
    #[serde(default = "default_key_env")]
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Minimum spacing between requests across all threads.
    #[serde(default)]
    pub min_interval_ms: u64,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    last_request: Mutex<Option<Instant>>,
    audit: Option<Mutex<File>>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, audit_log: Option<&Path>) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingKey { var: var.clone() })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport { message: e.to_string() })?;
        let audit = match audit_log {
            Some(path) => {
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| BackendError::Other { message: format!("{}: {e}", path.display()) })?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        Ok(RemoteBackend { config, api_key, client, last_request: Mutex::new(None), audit })
    }

    fn pace(&self) {
        let interval = Duration::from_millis(self.config.min_interval_ms);
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + interval;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }

    fn audit(&self, entry: Value) {
        if let Some(file) = &self.audit {
            let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
            let _ = writeln!(file, "{entry}");
        }
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        if let Some(t) = request.params.temperature.or(self.config.temperature) {
            body["temperature"] = json!(t);
        }
        if let Some(m) = request.params.max_tokens.or(self.config.max_tokens) {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<(u16, String), BackendError> {
        self.pace();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport { message: e.to_string() }
            }
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport { message: e.to_string() }
            }
        })?;
        Ok((status, text))
    }
}

fn parse_completion(text: &str) -> Result<Completion, BackendError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| BackendError::Protocol { message: format!("invalid JSON: {e}") })?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| BackendError::Protocol { message: "missing choices[0].message.content".into() })?;
    Ok(Completion {
        text: content.to_string(),
        prompt_tokens: value["usage"]["prompt_tokens"].as_u64(),
        completion_tokens: value["usage"]["completion_tokens"].as_u64(),
    })
}

impl Backend for RemoteBackend {
    fn id(&self) -> String {
        self.config.id.clone().unwrap_or_else(|| self.config.model.clone())
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        let body = self.body(request);
        let attempts = self.config.max_retries + 1;
        let mut last = BackendError::Other { message: "no attempt made".into() };
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16))));
            }
            let started = Instant::now();
            let outcome = self.attempt(&body).and_then(|(status, text)| {
                if (200..300).contains(&status) {
                    parse_completion(&text).map(|c| (status, text, c))
                } else {
                    Err(BackendError::Http { status, body: text })
                }
            });
            let elapsed_ms = started.elapsed().as_millis() as u64;
            match outcome {
                Ok((status, text, completion)) => {
                    self.audit(json!({
                        "instance_id": request.meta.instance_id,
                        "kind": request.meta.kind,
                        "clause": request.meta.clause,
                        "attempt": attempt,
                        "elapsed_ms": elapsed_ms,
                        "request": body,
                        "status": status,
                        "response": text,
                    }));
                    return Ok(completion);
                }
                Err(err) => {
                    self.audit(json!({
                        "instance_id": request.meta.instance_id,
                        "kind": request.meta.kind,
                        "clause": request.meta.clause,
                        "attempt": attempt,
                        "elapsed_ms": elapsed_ms,
                        "request": body,
                        "error": err,
                    }));
                    let transient = err.is_transient();
                    last = err;
                    if !transient {
                        return Err(last);
                    }
                }
            }
        }
        Err(BackendError::Exhausted { attempts, last: Box::new(last) })
    }
}
