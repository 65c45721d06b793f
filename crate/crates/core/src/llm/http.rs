//! Chat-completion style HTTP backend.

use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::backend::{estimate_tokens, BackendError, ChatBackend, ChatRequest, Completion};

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub path: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

pub struct HttpBackend {
    client: Client,
    url: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Fatal(format!("building HTTP client: {e}")))?;
        let url = format!(
            "{}/{}",
            cfg.base_url.trim_end_matches('/'),
            cfg.path.trim_start_matches('/')
        );
        Ok(HttpBackend {
            client,
            url,
            model: cfg.model,
            api_key: cfg.api_key,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn classify_status(status: StatusCode, body: String) -> BackendError {
    let msg = format!("{status}: {}", body.chars().take(300).collect::<String>());
    match status.as_u16() {
        401 | 403 => BackendError::Auth(msg),
        408 | 409 | 425 | 429 => BackendError::Transient(msg),
        s if s >= 500 => BackendError::Transient(msg),
        _ => BackendError::Fatal(msg),
    }
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}#{}", self.url, self.model)
    }

    fn complete(&self, req: &ChatRequest<'_>) -> Result<Completion, BackendError> {
        let body = WireRequest {
            model: &self.model,
            messages: [WireMessage {
                role: "user",
                content: req.prompt,
            }],
            temperature: req.temperature,
        };
        let started = Instant::now();
        let mut builder = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                BackendError::Transient(e.to_string())
            } else {
                BackendError::Fatal(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(classify_status(status, text));
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| BackendError::Fatal(format!("malformed completion body: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("completion has no choices".into()))?;
        let (tokens_in, tokens_out) = match parsed.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (estimate_tokens(req.prompt), estimate_tokens(&text)),
        };
        Ok(Completion {
            text,
            tokens_in,
            tokens_out,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
