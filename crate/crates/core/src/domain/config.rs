use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Every knob of one pipeline run. Loadable from TOML; any missing field
/// takes its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Maximum retrieval rounds.
    pub t_max: usize,
    /// Documents retrieved per query.
    pub k: usize,
    /// Maximum follow-up queries kept per audit.
    pub m: usize,
    pub temp_interpreter_explorer: f64,
    pub temp_arbiter: f64,
    /// Extra attempts when an agent's output cannot be parsed.
    pub max_parse_retries: u32,
    /// Require agent JSON to be the whole reply instead of extracting the first object.
    pub strict_json: bool,
    /// Characters of each document shown in evidence listings.
    pub summary_chars: usize,
    pub query_context: QueryContext,
    pub ablation: Ablation,
    pub budget: Budget,
    pub retry: RetryPolicy,
    pub cache: CacheConfig,
    pub backend: BackendConfig,
    pub embedder: EmbedderConfig,
    pub workers: usize,
    pub max_in_flight: usize,
    pub timing: Timing,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_max: 2,
            k: 16,
            m: 3,
            temp_interpreter_explorer: 1.0,
            temp_arbiter: 0.0,
            max_parse_retries: 1,
            strict_json: false,
            summary_chars: 800,
            query_context: QueryContext::Cumulative,
            ablation: Ablation::default(),
            budget: Budget::default(),
            retry: RetryPolicy::default(),
            cache: CacheConfig::default(),
            backend: BackendConfig::default(),
            embedder: EmbedderConfig::default(),
            workers: 4,
            max_in_flight: 8,
            timing: Timing::Wall,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field} must be {rule}")]
    Invalid { field: &'static str, rule: &'static str },
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, rule| Err(ConfigError::Invalid { field, rule });
        if self.t_max < 1 {
            return invalid("t_max", ">= 1");
        }
        if self.k < 1 {
            return invalid("k", ">= 1");
        }
        if self.m < 1 {
            return invalid("m", ">= 1");
        }
        if !(self.temp_interpreter_explorer.is_finite() && self.temp_interpreter_explorer >= 0.0) {
            return invalid("temp_interpreter_explorer", "a finite value >= 0");
        }
        if !(self.temp_arbiter.is_finite() && self.temp_arbiter >= 0.0) {
            return invalid("temp_arbiter", "a finite value >= 0");
        }
        if self.workers < 1 {
            return invalid("workers", ">= 1");
        }
        if self.max_in_flight < 1 {
            return invalid("max_in_flight", ">= 1");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_toml_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Round budget after ablations are applied.
    pub fn effective_t_max(&self) -> usize {
        if self.ablation.single_round {
            1
        } else {
            self.t_max
        }
    }
}

/// Which queries the auditor is shown under "Current Query Set".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryContext {
    /// Every query issued so far.
    Cumulative,
    /// Only the current round's queries.
    Current,
}

/// Role-removal switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Use the raw stem as the first query; no interpreter call.
    pub skip_interpreter: bool,
    /// Exactly one retrieval round.
    pub single_round: bool,
    /// Answer straight from the evidence; no adjudication report.
    pub skip_adjudication: bool,
}

impl Ablation {
    pub fn label(&self) -> &'static str {
        match (self.skip_interpreter, self.single_round, self.skip_adjudication) {
            (false, false, false) => "full",
            (true, false, false) => "no-interpreter",
            (false, true, false) => "no-explorer",
            (false, false, true) => "no-adjudicator",
            _ => "custom",
        }
    }
}

/// Per-question ceiling on live LLM usage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub max_calls: u64,
    pub max_tokens: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_calls: 64,
            max_tokens: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 250,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
    pub fn delay_ms(&self, attempt: u32) -> u64 {
        self.base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub enabled: bool,
    /// Directory for persisted entries; in-memory only when unset.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Mock {
        script: Option<PathBuf>,
    },
    Http {
        base_url: String,
        #[serde(default = "default_chat_path")]
        path: String,
        model: String,
        /// Name of the environment variable holding the API key.
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_chat_path() -> String {
    "/v1/chat/completions".to_string()
}

fn default_api_key_env() -> String {
    "EVLOOP_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Mock { script: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Mock {
        #[serde(default = "default_mock_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Remote {
        url: String,
        dim: usize,
        #[serde(default = "default_embed_batch")]
        batch_size: usize,
    },
}

fn default_mock_dim() -> usize {
    256
}

fn default_embed_batch() -> usize {
    64
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Mock {
            dim: default_mock_dim(),
            seed: 0,
        }
    }
}

/// Source of per-question wall time. `Frozen` reports zero so that runs
/// against the scripted backend produce identical records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Wall,
    Frozen,
}
