//! Access to the shared language model.

mod backend;
mod cache;
mod gateway;
mod http;
pub mod json;
mod mock;
mod prompt;

use std::sync::Arc;
use std::time::Duration;

pub use backend::{estimate_tokens, BackendError, ChatBackend, ChatRequest, Completion};
pub use cache::{cache_key, CacheCorrupt, CompletionCache};
pub use gateway::{GatewayError, LlmGateway, Meter};
pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::{InjectedError, MockBackend, RecordedRequest, ScriptError, ScriptLine};
pub use prompt::{
    placeholders, render, RenderError, Role, RolePrompt, ADJUDICATOR_TEMPLATE, ANSWERER_MCQ_TEMPLATE,
    ANSWERER_YNM_TEMPLATE, ANSWERER_YN_TEMPLATE, EXPLORER_TEMPLATE, INTERPRETER_TEMPLATE,
};

use crate::domain::{BackendConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cache directory: {0}")]
    Cache(#[from] std::io::Error),
}

/// Builds the gateway described by `config`. The API key, if any, is read
/// from the environment variable the config names.
pub fn build_gateway(config: &RunConfig) -> Result<LlmGateway, BuildError> {
    let backend: Arc<dyn ChatBackend> = match &config.backend {
        BackendConfig::Mock { script } => match script {
            Some(path) => Arc::new(MockBackend::from_jsonl_file(path)?),
            None => Arc::new(MockBackend::new()),
        },
        BackendConfig::Http {
            base_url,
            path,
            model,
            api_key_env,
            timeout_secs,
        } => Arc::new(HttpBackend::new(HttpBackendConfig {
            base_url: base_url.clone(),
            path: path.clone(),
            model: model.clone(),
            api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(*timeout_secs),
        })?),
    };
    let mut gateway = LlmGateway::new(backend, config);
    if config.cache.enabled {
        let cache = match &config.cache.dir {
            Some(dir) => CompletionCache::persistent(dir)?,
            None => CompletionCache::in_memory(),
        };
        gateway = gateway.with_cache(cache);
    }
    Ok(gateway)
}
