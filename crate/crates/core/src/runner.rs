//! Candidate generation against chat-completion endpoints.
//!
//! Each test report's findings are rendered into a prompt and sent as
//! `{"model", "messages": [{"role": "user", "content": prompt}], "temperature": 0}`.
//! Responses are cached per `(model, prompt)` so reruns are offline.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::Report;
use crate::error::{Error, Result};

pub const FINDINGS_PLACEHOLDER: &str = "{findings}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestTemplate {
    #[default]
    ChatCompletion,
}

fn default_retries() -> u32 {
    3
}
fn default_parallelism() -> usize {
    1
}
fn default_timeout() -> f64 {
    120.0
}
fn default_backoff_ms() -> u64 {
    500
}

/// Per-model endpoint settings. The API key is read from the environment
/// variable named by `api_key_env`, never from the file itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub model_name: String,
    /// API base such as `https://host/v1`; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub request_template: RequestTemplate,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Initial retry delay, doubled after each failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(model_name: impl Into<String>, base_url: impl Into<String>) -> Self {
        EndpointConfig {
            model_name: model_name.into(),
            base_url: base_url.into(),
            api_key_env: None,
            request_template: RequestTemplate::ChatCompletion,
            max_retries: default_retries(),
            parallelism: default_parallelism(),
            timeout: default_timeout(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EndpointConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(Error::Config("model_name is empty".into()));
        }
        Ok(())
    }

    fn endpoint_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn api_key(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Config(format!("environment variable {var} is not set"))),
        }
    }
}

/// A generated (or file-supplied) impression for one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(rename = "id")]
    pub report_id: String,
    #[serde(rename = "model")]
    pub model_name: String,
    pub impression: String,
    #[serde(skip)]
    pub latency_ms: u64,
    #[serde(skip)]
    pub cached: bool,
    #[serde(skip)]
    pub retries: u32,
}

impl Candidate {
    pub fn new(
        report_id: impl Into<String>,
        model_name: impl Into<String>,
        impression: impl Into<String>,
    ) -> Self {
        Candidate {
            report_id: report_id.into(),
            model_name: model_name.into(),
            impression: impression.into(),
            latency_ms: 0,
            cached: false,
            retries: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    #[serde(rename = "id")]
    pub report_id: String,
    #[serde(rename = "model")]
    pub model_name: String,
    pub message: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Generated(Candidate),
    Failed(GenerationFailure),
}

pub fn load_candidates(path: impl AsRef<Path>) -> Result<Vec<Candidate>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Substitutes the findings into the single `{findings}` placeholder.
pub fn render_prompt(template: &str, findings: &str) -> Result<String> {
    match template.matches(FINDINGS_PLACEHOLDER).count() {
        1 => Ok(template.replacen(FINDINGS_PLACEHOLDER, findings, 1)),
        0 => Err(Error::Config(
            "prompt template has no {findings} placeholder".into(),
        )),
        n => Err(Error::Config(format!(
            "prompt template has {n} {{findings}} placeholders, expected one"
        ))),
    }
}

pub fn cache_key(model_name: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_name.as_bytes());
    hasher.update([0u8]);
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    /// Response body exactly as received.
    pub raw_response: String,
}

/// One JSON file per key under a directory.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ResponseCache { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>> {
        let path = self.path(key);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| Error::Parse {
                    path,
                    line: 1,
                    message: e.to_string(),
                }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Writes via a temporary file and rename so readers never see a
    /// partial entry.
    pub fn put(&self, entry: &CacheEntry) -> Result<()> {
        let path = self.path(&entry.key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{:?}.tmp",
            entry.key,
            std::process::id(),
            std::thread::current().id()
        ));
        let body = serde_json::to_vec(entry).expect("cache entry serializes");
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Extracts `choices[0].message.content` from a chat-completion response.
pub fn parse_chat_response(raw: &str) -> std::result::Result<String, String> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| format!("response is not JSON: {e}"))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(|c| c.trim().to_string())
        .ok_or_else(|| "response has no choices[0].message.content".to_string())
}

enum CallError {
    /// Worth retrying: transport failure or non-success status.
    Transient(String),
}

struct Client {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl Client {
    fn new(cfg: &EndpointConfig) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Client {
            agent,
            url: cfg.endpoint_url(),
            api_key: cfg.api_key()?,
        })
    }

    fn call(&self, model: &str, prompt: &str) -> std::result::Result<String, CallError> {
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        })
        .to_string();
        let mut request = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send(body)
            .map_err(|e| CallError::Transient(e.to_string()))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CallError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(CallError::Transient(format!("HTTP {}", status.as_u16())));
        }
        Ok(text)
    }
}

fn generate_one(
    report: &Report,
    cfg: &EndpointConfig,
    template: &str,
    cache: &ResponseCache,
    client: &Client,
) -> Result<Outcome> {
    let prompt = render_prompt(template, &report.findings)?;
    let key = cache_key(&cfg.model_name, &prompt);
    let failure = |message: String, attempts: u32| {
        Outcome::Failed(GenerationFailure {
            report_id: report.id.clone(),
            model_name: cfg.model_name.clone(),
            message,
            attempts,
        })
    };

    if let Some(entry) = cache.get(&key)? {
        return Ok(match parse_chat_response(&entry.raw_response) {
            Ok(impression) => Outcome::Generated(Candidate {
                cached: true,
                ..Candidate::new(&report.id, &cfg.model_name, impression)
            }),
            Err(message) => failure(format!("cached response: {message}"), 0),
        });
    }

    let started = Instant::now();
    let mut attempt = 0;
    let raw = loop {
        match client.call(&cfg.model_name, &prompt) {
            Ok(raw) => break raw,
            Err(CallError::Transient(message)) => {
                if attempt >= cfg.max_retries {
                    return Ok(failure(
                        format!("giving up after {} attempts: {message}", attempt + 1),
                        attempt + 1,
                    ));
                }
                let delay = cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                std::thread::sleep(Duration::from_millis(delay));
                attempt += 1;
            }
        }
    };
    let latency_ms = started.elapsed().as_millis() as u64;

    match parse_chat_response(&raw) {
        Ok(impression) => {
            cache.put(&CacheEntry {
                key,
                model: cfg.model_name.clone(),
                raw_response: raw,
            })?;
            Ok(Outcome::Generated(Candidate {
                latency_ms,
                retries: attempt,
                ..Candidate::new(&report.id, &cfg.model_name, impression)
            }))
        }
        Err(message) => Ok(failure(message, attempt + 1)),
    }
}

/// Generates one outcome per report, in input order, with at most
/// `cfg.parallelism` requests in flight.
///
/// Per-sample failures are returned as [`Outcome::Failed`]; only
/// configuration and cache I/O problems abort the run.
pub fn generate_candidates(
    reports: &[&Report],
    cfg: &EndpointConfig,
    template: &str,
    cache_dir: impl Into<PathBuf>,
) -> Result<Vec<Outcome>> {
    cfg.validate()?;
    // fail fast on a bad template
    render_prompt(template, "")?;
    let cache = ResponseCache::open(cache_dir)?;
    let client = Client::new(cfg)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Outcome>>>> =
        Mutex::new((0..reports.len()).map(|_| None).collect());
    let workers = cfg.parallelism.min(reports.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= reports.len() {
                    break;
                }
                let outcome = generate_one(reports[i], cfg, template, &cache, &client);
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every report processed"))
        .collect()
}
