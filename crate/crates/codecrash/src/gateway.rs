//! Provider-agnostic chat-completion client with the evaluation sampling
//! configuration, token accounting, and record/replay cassettes for
//! offline tests.
//!
//! Model ids take the form `provider:name`. The `mock` provider needs no
//! network: `mock:echo` answers with the prompt's last non-empty line.
//! Any other provider resolves `CODECRASH_BASE_URL_<PROVIDER>` and
//! `CODECRASH_API_KEY_<PROVIDER>` and speaks the OpenAI-compatible
//! chat-completions schema.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n_candidates: u32,
}

impl SamplingConfig {
    /// Direct inference: three short candidates.
    pub fn direct() -> Self {
        SamplingConfig {
            temperature: 0.2,
            top_p: 0.95,
            max_tokens: 200,
            n_candidates: 3,
        }
    }

    /// CoT inference: one long candidate.
    pub fn cot() -> Self {
        SamplingConfig {
            temperature: 0.2,
            top_p: 0.95,
            max_tokens: 2000,
            n_candidates: 1,
        }
    }

    /// Reasoning-model override: very long completion budget.
    pub fn reasoning() -> Self {
        SamplingConfig {
            max_tokens: 20000,
            ..SamplingConfig::cot()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature < 0.0
            || self.top_p <= 0.0
            || self.top_p > 1.0
            || self.max_tokens == 0
            || self.n_candidates == 0
        {
            return Err(GatewayError::Provider(format!(
                "invalid sampling config: {:?}",
                self
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
    pub latency: f64,
    pub truncated: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after retries: {0}")]
    RateLimited(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("cassette miss for request {0}")]
    CassetteMiss(String),
    #[error("cassette i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    Record,
    Replay,
    Off,
}

#[derive(Serialize, Deserialize)]
struct CassetteEntry {
    hash: String,
    model_id: String,
    responses: Vec<ModelResponse>,
}

/// Append-only response store keyed by request hash.
pub struct Cassette {
    path: PathBuf,
    mode: CassetteMode,
    entries: HashMap<String, Vec<ModelResponse>>,
}

impl Cassette {
    pub fn open(path: &Path, mode: CassetteMode) -> Result<Self, GatewayError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            for line in text.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CassetteEntry = serde_json::from_str(line)
                    .map_err(|e| GatewayError::Provider(format!("corrupt cassette: {}", e)))?;
                entries.insert(entry.hash, entry.responses);
            }
        } else if mode == CassetteMode::Replay {
            return Err(GatewayError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cassette {} not found", path.display()),
            )));
        }
        Ok(Cassette {
            path: path.to_path_buf(),
            mode,
            entries,
        })
    }

    pub fn lookup(&self, hash: &str) -> Option<&Vec<ModelResponse>> {
        self.entries.get(hash)
    }

    pub fn record(
        &mut self,
        hash: &str,
        model_id: &str,
        responses: &[ModelResponse],
    ) -> Result<(), GatewayError> {
        let entry = CassetteEntry {
            hash: hash.to_string(),
            model_id: model_id.to_string(),
            responses: responses.to_vec(),
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        self.entries.insert(hash.to_string(), entry.responses);
        Ok(())
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }
}

/// Stable hash covering everything that shapes a completion request.
pub fn request_hash(model_id: &str, prompt: &str, config: &SamplingConfig) -> String {
    let mut hasher = Sha256::new();
    let key = serde_json::json!({
        "model_id": model_id,
        "prompt": prompt,
        "temperature": config.temperature,
        "top_p": config.top_p,
        "max_tokens": config.max_tokens,
        "n_candidates": config.n_candidates,
    });
    hasher.update(key.to_string().as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

pub struct Gateway {
    cassette: Option<Mutex<Cassette>>,
    request_count: AtomicU64,
    max_retries: u32,
    /// Minimum spacing between requests per model id.
    rate_limits: Mutex<HashMap<String, (Duration, Instant)>>,
}

impl Gateway {
    pub fn new(cassette: Option<Cassette>) -> Self {
        Gateway {
            cassette: cassette.map(Mutex::new),
            request_count: AtomicU64::new(0),
            max_retries: 3,
            rate_limits: Mutex::new(HashMap::new()),
        }
    }

    pub fn offline() -> Self {
        Gateway::new(None)
    }

    /// Requests issued to providers or mocks (cassette hits excluded).
    pub fn live_request_count(&self) -> u64 {
        self.request_count.load(Ordering::Relaxed)
    }

    pub fn set_rate_limit(&self, model_id: &str, min_interval: Duration) {
        let mut limits = self.rate_limits.lock().unwrap();
        limits.insert(
            model_id.to_string(),
            (min_interval, Instant::now() - min_interval),
        );
    }

    /// Run one completion request, returning exactly `n_candidates`
    /// responses. Replay is served from the cassette; recording appends
    /// fresh exchanges to it.
    pub fn complete(
        &self,
        model_id: &str,
        prompt: &str,
        config: &SamplingConfig,
    ) -> Result<Vec<ModelResponse>, GatewayError> {
        config.validate()?;
        let hash = request_hash(model_id, prompt, config);
        if let Some(cassette) = &self.cassette {
            let guard = cassette.lock().unwrap();
            match guard.mode() {
                CassetteMode::Replay => {
                    return guard
                        .lookup(&hash)
                        .cloned()
                        .ok_or(GatewayError::CassetteMiss(hash));
                }
                CassetteMode::Record => {
                    if let Some(hit) = guard.lookup(&hash) {
                        return Ok(hit.clone());
                    }
                }
                CassetteMode::Off => {}
            }
        }

        self.throttle(model_id);
        let responses = self.dispatch(model_id, prompt, config)?;

        if let Some(cassette) = &self.cassette {
            let mut guard = cassette.lock().unwrap();
            if guard.mode() == CassetteMode::Record {
                guard.record(&hash, model_id, &responses)?;
            }
        }
        Ok(responses)
    }

    fn throttle(&self, model_id: &str) {
        let mut limits = self.rate_limits.lock().unwrap();
        if let Some((interval, last)) = limits.get_mut(model_id) {
            let next_ok = *last + *interval;
            let now = Instant::now();
            if next_ok > now {
                std::thread::sleep(next_ok - now);
            }
            *last = Instant::now();
        }
    }

    fn dispatch(
        &self,
        model_id: &str,
        prompt: &str,
        config: &SamplingConfig,
    ) -> Result<Vec<ModelResponse>, GatewayError> {
        self.request_count.fetch_add(1, Ordering::Relaxed);
        let (provider, name) = model_id.split_once(':').ok_or_else(|| {
            GatewayError::Provider(format!("model id '{}' lacks a provider prefix", model_id))
        })?;
        if provider == "mock" {
            return mock_complete(name, prompt, config);
        }
        self.http_complete(provider, name, prompt, config)
    }

    fn http_complete(
        &self,
        provider: &str,
        model: &str,
        prompt: &str,
        config: &SamplingConfig,
    ) -> Result<Vec<ModelResponse>, GatewayError> {
        let upper = provider.to_ascii_uppercase().replace('-', "_");
        let api_key = std::env::var(format!("CODECRASH_API_KEY_{}", upper))
            .map_err(|_| GatewayError::Auth(format!("CODECRASH_API_KEY_{} is not set", upper)))?;
        let base_url =
            std::env::var(format!("CODECRASH_BASE_URL_{}", upper)).unwrap_or_else(|_| {
                match provider {
                    "openai" => "https://api.openai.com/v1".to_string(),
                    other => format!("https://api.{}.com/v1", other),
                }
            });
        let url = format!("{}/chat/completions", base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_tokens,
            "n": config.n_candidates,
        });

        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Provider(e.to_string()))?;

        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let backoff = Duration::from_millis(500 * (1 << (attempt - 1).min(4)));
                std::thread::sleep(backoff);
            }
            let start = Instant::now();
            let resp = client.post(&url).bearer_auth(&api_key).json(&body).send();
            match resp {
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        return Err(GatewayError::Auth(format!("{} from provider", status)));
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_err = format!("{} from provider", status);
                        continue; // transient
                    }
                    if !status.is_success() {
                        let text = resp.text().unwrap_or_default();
                        return Err(GatewayError::Provider(format!("{}: {}", status, text)));
                    }
                    let latency = start.elapsed().as_secs_f64();
                    let parsed: serde_json::Value = resp
                        .json()
                        .map_err(|e| GatewayError::Provider(format!("bad response body: {}", e)))?;
                    return parse_chat_completion(&parsed, latency, config);
                }
                Err(e) => {
                    last_err = e.to_string();
                }
            }
        }
        Err(GatewayError::RateLimited(last_err))
    }
}

fn parse_chat_completion(
    value: &serde_json::Value,
    latency: f64,
    config: &SamplingConfig,
) -> Result<Vec<ModelResponse>, GatewayError> {
    let usage = &value["usage"];
    let prompt_tokens = usage["prompt_tokens"].as_u64().unwrap_or(0);
    let completion_tokens = usage["completion_tokens"].as_u64().unwrap_or(0);
    let reasoning_tokens = usage["completion_tokens_details"]["reasoning_tokens"].as_u64();
    let choices = value["choices"]
        .as_array()
        .ok_or_else(|| GatewayError::Provider("response has no choices".into()))?;
    let mut out = Vec::new();
    for choice in choices {
        let text = choice["message"]["content"]
            .as_str()
            .unwrap_or("")
            .to_string();
        let truncated = choice["finish_reason"].as_str() == Some("length");
        out.push(ModelResponse {
            text,
            prompt_tokens,
            completion_tokens,
            reasoning_tokens,
            latency,
            truncated,
        });
    }
    if out.len() != config.n_candidates as usize {
        return Err(GatewayError::Provider(format!(
            "expected {} candidates, provider returned {}",
            config.n_candidates,
            out.len()
        )));
    }
    Ok(out)
}

fn mock_complete(
    name: &str,
    prompt: &str,
    config: &SamplingConfig,
) -> Result<Vec<ModelResponse>, GatewayError> {
    let text = match name {
        // Echoes the prompt's last non-empty line.
        "echo" => prompt
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
            .to_string(),
        "empty" => String::new(),
        other => {
            return Err(GatewayError::Provider(format!(
                "unknown mock model '{}'",
                other
            )))
        }
    };
    let prompt_tokens = prompt.split_whitespace().count() as u64;
    let completion_tokens = text.split_whitespace().count() as u64;
    Ok((0..config.n_candidates)
        .map(|_| ModelResponse {
            text: text.clone(),
            prompt_tokens,
            completion_tokens,
            reasoning_tokens: None,
            latency: 0.0,
            truncated: false,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_config_carries_published_sampling() {
        let c = SamplingConfig::direct();
        assert_eq!(c.temperature, 0.2);
        assert_eq!(c.top_p, 0.95);
        assert_eq!(c.max_tokens, 200);
        assert_eq!(c.n_candidates, 3);
        let c = SamplingConfig::cot();
        assert_eq!(c.max_tokens, 2000);
        assert_eq!(c.n_candidates, 1);
        assert_eq!(SamplingConfig::reasoning().max_tokens, 20000);
    }

    #[test]
    fn mock_echo_returns_last_line_n_times() {
        let g = Gateway::offline();
        let out = g
            .complete("mock:echo", "first\nlast line", &SamplingConfig::direct())
            .unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|r| r.text == "last line"));
    }

    #[test]
    fn cassette_record_then_replay_is_identical() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("tape.jsonl");
        let recorded = {
            let cassette = Cassette::open(&path, CassetteMode::Record).unwrap();
            let g = Gateway::new(Some(cassette));
            g.complete("mock:echo", "a\nb", &SamplingConfig::direct())
                .unwrap()
        };
        let cassette = Cassette::open(&path, CassetteMode::Replay).unwrap();
        let g = Gateway::new(Some(cassette));
        let replayed = g
            .complete("mock:echo", "a\nb", &SamplingConfig::direct())
            .unwrap();
        assert_eq!(recorded, replayed);
        assert_eq!(g.live_request_count(), 0, "replay must not dispatch");
    }

    #[test]
    fn replay_misses_unseen_requests() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("tape.jsonl");
        std::fs::write(&path, "").unwrap();
        let g = Gateway::new(Some(Cassette::open(&path, CassetteMode::Replay).unwrap()));
        let err = g.complete("mock:echo", "x", &SamplingConfig::direct());
        assert!(matches!(err, Err(GatewayError::CassetteMiss(_))));
    }

    #[test]
    fn config_change_invalidates_cassette_hit() {
        let a = request_hash("m", "p", &SamplingConfig::direct());
        let b = request_hash("m", "p", &SamplingConfig::cot());
        assert_ne!(a, b);
        let c = request_hash("m", "p2", &SamplingConfig::direct());
        assert_ne!(a, c);
        assert_eq!(a, request_hash("m", "p", &SamplingConfig::direct()));
    }
}
