//! Scripted provider for tests and offline runs.
//!
//! A script is a JSON array of entries keyed on `(stage, doc_id, attempt)`.
//! Lookup falls back from the exact attempt to an entry without an attempt,
//! and from the doc id to the wildcard `"*"`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, CallMeta, Provider, ProviderError, ProviderRequest, ProviderResponse, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: Stage,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    pub response: String,
    /// Transport attempts that fail before this entry is served.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub transport_failures: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

type Key = (Stage, String, Option<u32>);

pub struct MockProvider {
    entries: HashMap<Key, ScriptEntry>,
    failures_left: Mutex<HashMap<Key, u32>>,
}

impl MockProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let mut map = HashMap::new();
        let mut failures = HashMap::new();
        for e in entries {
            let key = (e.stage, e.doc_id.clone(), e.attempt);
            if e.transport_failures > 0 {
                failures.insert(key.clone(), e.transport_failures);
            }
            map.insert(key, e);
        }
        Self {
            entries: map,
            failures_left: Mutex::new(failures),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    fn lookup(&self, meta: &CallMeta) -> Option<(&Key, &ScriptEntry)> {
        let candidates = [
            (meta.stage, meta.doc_id.clone(), Some(meta.attempt)),
            (meta.stage, meta.doc_id.clone(), None),
            (meta.stage, "*".to_string(), Some(meta.attempt)),
            (meta.stage, "*".to_string(), None),
        ];
        candidates.into_iter().find_map(|k| self.entries.get_key_value(&k))
    }
}

impl Provider for MockProvider {
    fn complete(&self, req: &ProviderRequest, meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        let (key, entry) = self.lookup(meta).ok_or_else(|| {
            ProviderError::Fatal(format!(
                "no scripted response for stage={} doc_id={} attempt={}",
                meta.stage.as_str(),
                meta.doc_id,
                meta.attempt
            ))
        })?;
        {
            let mut left = self.failures_left.lock().expect("mock state poisoned");
            if let Some(n) = left.get_mut(key) {
                if *n > 0 {
                    *n -= 1;
                    return Err(ProviderError::Transient("scripted transport failure".into()));
                }
            }
        }
        Ok(ProviderResponse {
            text: entry.response.clone(),
            prompt_tokens: estimate_tokens(req.system_prompt.chars().count() + req.user_content.chars().count()),
            completion_tokens: estimate_tokens(entry.response.chars().count()),
            latency_ms: 0,
        })
    }
}
