use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::DEFAULT_CORRECTION_BUDGET;
use crate::ingest::DEFAULT_HEAD_LIMIT;

pub const DEFAULT_WORKERS: usize = 4;
pub const DEFAULT_DOC_TIMEOUT_SECS: u64 = 300;

/// Effective pipeline settings. Sources merge as flags > environment > file
/// > built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub limit_chars: usize,
    pub correction_budget: u32,
    pub workers: usize,
    pub doc_timeout_secs: u64,
    /// `mock:<script>`, `http` or an endpoint URL.
    pub provider: Option<String>,
    /// Serialized documents, verdicts and the resume manifest live here.
    pub workdir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            limit_chars: DEFAULT_HEAD_LIMIT,
            correction_budget: DEFAULT_CORRECTION_BUDGET,
            workers: DEFAULT_WORKERS,
            doc_timeout_secs: DEFAULT_DOC_TIMEOUT_SECS,
            provider: None,
            workdir: PathBuf::from("cmdb-work"),
        }
    }
}

/// One layer of settings; unset fields defer to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub limit_chars: Option<usize>,
    pub correction_budget: Option<u32>,
    pub workers: Option<usize>,
    pub doc_timeout_secs: Option<u64>,
    pub provider: Option<String>,
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub const ENV_VARS: [(&str, &str); 6] = [
    ("CM_LIMIT_CHARS", "limit_chars"),
    ("CM_CORRECTION_BUDGET", "correction_budget"),
    ("CM_WORKERS", "workers"),
    ("CM_DOC_TIMEOUT_SECS", "doc_timeout_secs"),
    ("CM_PROVIDER", "provider"),
    ("CM_WORKDIR", "workdir"),
];

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Reads the `CM_*` variables through `get` so tests need not touch the
    /// process environment.
    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn num<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>, ConfigError> {
            v.map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Env {
                    name: name.to_string(),
                    message: format!("`{s}` is not a valid number"),
                })
            })
            .transpose()
        }
        Ok(Self {
            limit_chars: num("CM_LIMIT_CHARS", get("CM_LIMIT_CHARS"))?,
            correction_budget: num("CM_CORRECTION_BUDGET", get("CM_CORRECTION_BUDGET"))?,
            workers: num("CM_WORKERS", get("CM_WORKERS"))?,
            doc_timeout_secs: num("CM_DOC_TIMEOUT_SECS", get("CM_DOC_TIMEOUT_SECS"))?,
            provider: get("CM_PROVIDER").filter(|s| !s.is_empty()),
            workdir: get("CM_WORKDIR").filter(|s| !s.is_empty()).map(PathBuf::from),
        })
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(v) = self.limit_chars {
            c.limit_chars = v;
        }
        if let Some(v) = self.correction_budget {
            c.correction_budget = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.doc_timeout_secs {
            c.doc_timeout_secs = v;
        }
        if let Some(v) = &self.provider {
            c.provider = Some(v.clone());
        }
        if let Some(v) = &self.workdir {
            c.workdir = v.clone();
        }
    }
}

impl PipelineConfig {
    /// Merges layers in increasing precedence: file, env, flags.
    pub fn merge(file: &ConfigLayer, env: &ConfigLayer, flags: &ConfigLayer) -> Result<Self, ConfigError> {
        let mut c = PipelineConfig::default();
        for layer in [file, env, flags] {
            layer.apply(&mut c);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.limit_chars == 0 {
            return Err(ConfigError::Invalid("limit_chars must be positive".into()));
        }
        if self.correction_budget == 0 {
            return Err(ConfigError::Invalid("correction_budget must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.doc_timeout_secs == 0 {
            return Err(ConfigError::Invalid("doc_timeout_secs must be positive".into()));
        }
        Ok(())
    }
}
