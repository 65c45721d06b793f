//! Scripted backend for deterministic runs.
//!
//! A script is JSONL, one `{role, turn, response}` object per line. Replies are
//! consumed in `turn` order per role. An optional `question` field pins a reply
//! to one question id, which keeps concurrent batch runs deterministic;
//! unpinned replies form a shared per-role queue used when no pinned reply is
//! left. An `error` field (`"transient"`, `"auth"` or `"fatal"`) in place of
//! `response` injects a failure.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{estimate_tokens, BackendError, ChatBackend, ChatRequest, Completion};
use super::prompt::Role;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub role: Role,
    #[serde(default)]
    pub turn: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<InjectedError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedError {
    Transient,
    Auth,
    Fatal,
}

#[derive(Debug, Clone)]
enum Reply {
    Text(String),
    Fail(InjectedError),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("mock script line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("reading mock script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A request as seen by the mock, kept for inspection in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub question_id: String,
}

type QueueKey = (Option<String>, Role);

#[derive(Debug, Default)]
pub struct MockBackend {
    queues: Mutex<HashMap<QueueKey, VecDeque<Reply>>>,
    log: Mutex<Vec<RecordedRequest>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn enqueue(&self, question: Option<&str>, role: Role, reply: Reply) {
        self.queues
            .lock()
            .unwrap()
            .entry((question.map(str::to_string), role))
            .or_default()
            .push_back(reply);
    }

    /// Appends a reply to the shared queue for `role`.
    pub fn push(&self, role: Role, response: impl Into<String>) -> &Self {
        self.enqueue(None, role, Reply::Text(response.into()));
        self
    }

    /// Appends a reply reserved for `question_id`.
    pub fn push_for(&self, question_id: &str, role: Role, response: impl Into<String>) -> &Self {
        self.enqueue(Some(question_id), role, Reply::Text(response.into()));
        self
    }

    pub fn push_error(&self, question_id: Option<&str>, role: Role, error: InjectedError) -> &Self {
        self.enqueue(question_id, role, Reply::Fail(error));
        self
    }

    pub fn from_lines(lines: Vec<ScriptLine>) -> Result<Self, ScriptError> {
        let mock = MockBackend::new();
        let mut indexed: Vec<(usize, ScriptLine)> = lines.into_iter().enumerate().collect();
        // stable: equal turns keep file order
        indexed.sort_by_key(|(_, l)| l.turn);
        for (idx, line) in indexed {
            let reply = match (line.response, line.error) {
                (Some(text), None) => Reply::Text(text),
                (None, Some(err)) => Reply::Fail(err),
                _ => {
                    return Err(ScriptError::Line {
                        line: idx + 1,
                        message: "exactly one of `response` or `error` is required".into(),
                    })
                }
            };
            mock.enqueue(line.question.as_deref(), line.role, reply);
        }
        Ok(mock)
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self, ScriptError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ScriptLine = serde_json::from_str(raw).map_err(|e| ScriptError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            lines.push(line);
        }
        Self::from_lines(lines)
    }

    pub fn from_jsonl_file(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl_str(&text)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().unwrap().clone()
    }

    /// Replies not yet consumed, summed over all queues.
    pub fn remaining(&self) -> usize {
        self.queues.lock().unwrap().values().map(VecDeque::len).sum()
    }

    fn next_reply(&self, question_id: &str, role: Role) -> Option<Reply> {
        let mut queues = self.queues.lock().unwrap();
        if let Some(r) = queues
            .get_mut(&(Some(question_id.to_string()), role))
            .and_then(VecDeque::pop_front)
        {
            return Some(r);
        }
        queues.get_mut(&(None, role)).and_then(VecDeque::pop_front)
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> String {
        "mock".to_string()
    }

    fn complete(&self, req: &ChatRequest<'_>) -> Result<Completion, BackendError> {
        self.log.lock().unwrap().push(RecordedRequest {
            role: req.role,
            prompt: req.prompt.to_string(),
            temperature: req.temperature,
            question_id: req.question_id.to_string(),
        });
        match self.next_reply(req.question_id, req.role) {
            Some(Reply::Text(text)) => Ok(Completion {
                tokens_in: estimate_tokens(req.prompt),
                tokens_out: estimate_tokens(&text),
                text,
                latency_ms: 0,
            }),
            Some(Reply::Fail(InjectedError::Transient)) => {
                Err(BackendError::Transient("injected by mock script".into()))
            }
            Some(Reply::Fail(InjectedError::Auth)) => Err(BackendError::Auth("injected by mock script".into())),
            Some(Reply::Fail(InjectedError::Fatal)) => Err(BackendError::Fatal("injected by mock script".into())),
            None => Err(BackendError::Fatal(format!(
                "mock script exhausted for role {} (question {})",
                req.role, req.question_id
            ))),
        }
    }
}
