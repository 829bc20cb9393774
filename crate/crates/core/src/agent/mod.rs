//! Provider access and the two agents.
//!
//! Every model call goes through [`ProviderClient`], which enforces the
//! context window of the requested tier, retries transient transport
//! failures, bounds concurrency and keeps a call log for cost accounting.

mod analyst;
mod gatekeeper;
mod http;
mod json;
mod mock;
pub mod prompts;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use analyst::{
    analyst_extract, build_analyst_request, self_correct_loop, CorrectionEntry, ExtractionResult,
    ExtractionStatus, DEFAULT_CORRECTION_BUDGET, LOCAL_CONTEXT_CHARS,
};
pub use gatekeeper::{gatekeeper_screen, parse_verdict, GateError, GateVerdict};
pub use http::{HttpProvider, HttpProviderConfig};
pub use json::strip_code_fences;
pub use mock::{MockProvider, ScriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTier {
    GatekeeperTier,
    AnalystTier,
}

impl ModelTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTier::GatekeeperTier => "gatekeeper_tier",
            ModelTier::AnalystTier => "analyst_tier",
        }
    }
}

impl fmt::Display for ModelTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pipeline stage a call belongs to; the mock script is keyed on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gatekeeper,
    Analyst,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Gatekeeper => "gatekeeper",
            Stage::Analyst => "analyst",
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gatekeeper" => Ok(Stage::Gatekeeper),
            "analyst" => Ok(Stage::Analyst),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub model_tier: ModelTier,
    pub system_prompt: String,
    pub user_content: String,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// Who is asking: used for mock lookup and the call log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallMeta {
    pub stage: Stage,
    pub doc_id: String,
    pub attempt: u32,
}

impl CallMeta {
    pub fn new(stage: Stage, doc_id: &str, attempt: u32) -> Self {
        Self {
            stage,
            doc_id: doc_id.to_string(),
            attempt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Retryable failure of one transport attempt.
    #[error("transient provider failure: {0}")]
    Transient(String),
    /// Non-retryable failure (bad request, missing script entry, ...).
    #[error("provider error: {0}")]
    Fatal(String),
    #[error("provider unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("request needs ~{estimated_tokens} tokens but the {tier} window is {window_tokens}")]
    ContextOverflow {
        tier: ModelTier,
        estimated_tokens: u64,
        window_tokens: u64,
    },
    #[error("request has empty user content")]
    EmptyRequest,
}

/// A model backend. Implementations perform exactly one transport attempt.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &ProviderRequest, meta: &CallMeta) -> Result<ProviderResponse, ProviderError>;
}

/// Rough token estimate used for window checks and the single-stage baseline.
pub fn estimate_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub gatekeeper_window_tokens: u64,
    pub analyst_window_tokens: u64,
    /// Transport retries after the first attempt.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    /// Minimum spacing between calls of one tier; 0 disables the limit.
    pub gatekeeper_min_interval_ms: u64,
    pub analyst_min_interval_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            gatekeeper_window_tokens: 16_384,
            analyst_window_tokens: 128_000,
            max_retries: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
            gatekeeper_min_interval_ms: 0,
            analyst_min_interval_ms: 0,
        }
    }
}

impl ClientConfig {
    pub fn window(&self, tier: ModelTier) -> u64 {
        match tier {
            ModelTier::GatekeeperTier => self.gatekeeper_window_tokens,
            ModelTier::AnalystTier => self.analyst_window_tokens,
        }
    }

    fn min_interval(&self, tier: ModelTier) -> Duration {
        Duration::from_millis(match tier {
            ModelTier::GatekeeperTier => self.gatekeeper_min_interval_ms,
            ModelTier::AnalystTier => self.analyst_min_interval_ms,
        })
    }
}

/// One logical call (including its transport retries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tier: ModelTier,
    pub stage: Stage,
    pub doc_id: String,
    pub attempt: u32,
    pub transport_attempts: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub ok: bool,
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
}

/// Shared, thread-safe front for a [`Provider`].
pub struct ProviderClient {
    provider: Box<dyn Provider>,
    config: ClientConfig,
    log: Mutex<Vec<CallRecord>>,
    gate: Gate,
    next_slot: Mutex<HashMap<ModelTier, Instant>>,
}

impl ProviderClient {
    pub fn new(provider: Box<dyn Provider>, config: ClientConfig) -> Self {
        Self {
            provider,
            config,
            log: Mutex::new(Vec::new()),
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            },
            next_slot: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Sends a request, retrying transient failures with exponential backoff.
    pub fn complete(&self, req: &ProviderRequest, meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        if req.user_content.trim().is_empty() {
            return Err(ProviderError::EmptyRequest);
        }
        let estimated = estimate_tokens(req.system_prompt.chars().count() + req.user_content.chars().count())
            + u64::from(req.max_output_tokens);
        let window = self.config.window(req.model_tier);
        if estimated > window {
            return Err(ProviderError::ContextOverflow {
                tier: req.model_tier,
                estimated_tokens: estimated,
                window_tokens: window,
            });
        }

        let _slot = self.acquire();
        let mut attempts = 0;
        let result = loop {
            self.pace(req.model_tier);
            attempts += 1;
            match self.provider.complete(req, meta) {
                Ok(resp) => break Ok(resp),
                Err(ProviderError::Transient(msg)) if attempts <= self.config.max_retries => {
                    let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempts - 1).min(16));
                    tracing::warn!(doc = %meta.doc_id, stage = meta.stage.as_str(), attempts, "transient provider failure: {msg}");
                    std::thread::sleep(Duration::from_millis(delay));
                }
                Err(ProviderError::Transient(msg)) => {
                    break Err(ProviderError::Unavailable { attempts, message: msg })
                }
                Err(other) => break Err(other),
            }
        };

        let (prompt_tokens, completion_tokens) = match &result {
            Ok(r) => (r.prompt_tokens, r.completion_tokens),
            Err(_) => (0, 0),
        };
        self.log.lock().expect("call log poisoned").push(CallRecord {
            tier: req.model_tier,
            stage: meta.stage,
            doc_id: meta.doc_id.clone(),
            attempt: meta.attempt,
            transport_attempts: attempts,
            prompt_tokens,
            completion_tokens,
            ok: result.is_ok(),
        });
        result
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().expect("call log poisoned").clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("call log poisoned").clear();
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut n = self.gate.in_flight.lock().expect("in-flight counter poisoned");
        while *n >= self.config.max_in_flight.max(1) {
            n = self.gate.freed.wait(n).expect("in-flight counter poisoned");
        }
        *n += 1;
        SlotGuard { gate: &self.gate }
    }

    /// Per-tier rate limit: reserve the next start time and sleep until it.
    fn pace(&self, tier: ModelTier) {
        let interval = self.config.min_interval(tier);
        if interval.is_zero() {
            return;
        }
        let wait = {
            let mut slots = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let start = slots.get(&tier).copied().filter(|t| *t > now).unwrap_or(now);
            slots.insert(tier, start + interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

struct SlotGuard<'a> {
    gate: &'a Gate,
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.in_flight.lock().expect("in-flight counter poisoned");
        *n -= 1;
        self.gate.freed.notify_one();
    }
}

/// Builds a provider from a spec string: `mock:<script.json>` or `http`.
///
/// The HTTP provider reads `CM_PROVIDER_URL`, `CM_API_KEY`,
/// `CM_GATEKEEPER_MODEL` and `CM_ANALYST_MODEL`.
pub fn provider_from_spec(spec: &str) -> Result<Box<dyn Provider>, ProviderError> {
    if let Some(path) = spec.strip_prefix("mock:") {
        let mock = MockProvider::from_file(std::path::Path::new(path))
            .map_err(|e| ProviderError::Fatal(format!("cannot load mock script {path}: {e}")))?;
        return Ok(Box::new(mock));
    }
    if spec == "http" || spec.starts_with("http://") || spec.starts_with("https://") {
        let mut cfg = HttpProviderConfig::from_env().map_err(ProviderError::Fatal)?;
        if spec != "http" {
            cfg.url = spec.to_string();
        }
        return Ok(Box::new(HttpProvider::new(cfg)?));
    }
    Err(ProviderError::Fatal(format!(
        "unknown provider `{spec}` (expected mock:<path>, http, or an endpoint URL)"
    )))
}
