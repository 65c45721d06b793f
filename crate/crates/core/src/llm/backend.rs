use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::Role;

/// One single-turn request to the shared model.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub role: Role,
    pub prompt: &'a str,
    pub temperature: f64,
    /// Routing hint for scripted backends; never sent over the wire.
    pub question_id: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: rate limits, 5xx, timeouts, dropped connections.
    #[error("transient backend error: {0}")]
    Transient(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("backend error: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

pub trait ChatBackend: Send + Sync {
    /// Stable identity used in cache keys.
    fn id(&self) -> String;

    fn complete(&self, req: &ChatRequest<'_>) -> Result<Completion, BackendError>;
}

/// Deterministic token estimate: ceil(chars / 4).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}
