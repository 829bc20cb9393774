//! Chat-completion style HTTP provider.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{CallMeta, ModelTier, Provider, ProviderError, ProviderRequest, ProviderResponse};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub gatekeeper_model: String,
    pub analyst_model: String,
    pub timeout: Duration,
}

impl HttpProviderConfig {
    pub fn from_env() -> Result<Self, String> {
        let url = std::env::var("CM_PROVIDER_URL").map_err(|_| "CM_PROVIDER_URL is not set".to_string())?;
        Ok(Self {
            url,
            api_key: std::env::var("CM_API_KEY").ok().filter(|k| !k.is_empty()),
            gatekeeper_model: std::env::var("CM_GATEKEEPER_MODEL").unwrap_or_else(|_| "gatekeeper".into()),
            analyst_model: std::env::var("CM_ANALYST_MODEL").unwrap_or_else(|_| "analyst".into()),
            timeout: Duration::from_secs(120),
        })
    }

    fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Fatal(format!("cannot build HTTP client: {e}")))?;
        Ok(Self { config, client })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Provider for HttpProvider {
    fn complete(&self, req: &ProviderRequest, _meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        let model = match req.model_tier {
            ModelTier::GatekeeperTier => &self.config.gatekeeper_model,
            ModelTier::AnalystTier => &self.config.analyst_model,
        };
        let body = json!({
            "model": model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_content},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let mut builder = self
            .client
            .post(self.config.endpoint())
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }

        let started = Instant::now();
        let resp = builder.send().map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::Transient(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !status.is_success() {
            return Err(ProviderError::Fatal(format!("HTTP {status}: {}", snippet(&text))));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Fatal(format!("unexpected response body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Fatal("response has no choices".into()))?
            .message
            .content;
        let usage = parsed.usage.unwrap_or(Usage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Ok(ProviderResponse {
            text: content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}
