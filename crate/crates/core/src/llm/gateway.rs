use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;
use tracing::{debug, warn};

use super::backend::{BackendError, ChatBackend, ChatRequest, Completion};
use super::cache::{cache_key, CompletionCache};
use super::prompt::Role;
use crate::domain::{Budget, CostCounters, RetryPolicy, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("backend still failing after {attempts} attempts: {last}")]
    TransientBackendError { attempts: u32, last: String },
    #[error("{0}")]
    AuthError(String),
    #[error("{0}")]
    Backend(String),
    #[error("budget exceeded: {used} of {limit} {what}")]
    BudgetExceeded { what: &'static str, used: u64, limit: u64 },
}

/// Per-question accounting and budget, threaded through every call.
#[derive(Debug, Clone)]
pub struct Meter {
    pub question_id: String,
    pub counters: CostCounters,
    pub budget: Budget,
}

impl Meter {
    pub fn new(question_id: impl Into<String>, budget: Budget) -> Self {
        Meter {
            question_id: question_id.into(),
            counters: CostCounters::default(),
            budget,
        }
    }

    fn check_budget(&self) -> Result<(), GatewayError> {
        let c = &self.counters;
        if c.llm_calls >= self.budget.max_calls {
            return Err(GatewayError::BudgetExceeded {
                what: "calls",
                used: c.llm_calls,
                limit: self.budget.max_calls,
            });
        }
        if c.total_tokens() >= self.budget.max_tokens {
            return Err(GatewayError::BudgetExceeded {
                what: "tokens",
                used: c.total_tokens(),
                limit: self.budget.max_tokens,
            });
        }
        Ok(())
    }
}

/// Counting semaphore bounding concurrent backend requests.
struct InFlight {
    slots: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(n: usize) -> Self {
        InFlight {
            slots: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.slots.lock().unwrap();
        while *free == 0 {
            free = self.freed.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.slots.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Role-conditioned access to the shared model: temperature selection,
/// caching, bounded retries and cost accounting.
pub struct LlmGateway {
    backend: Arc<dyn ChatBackend>,
    cache: Option<CompletionCache>,
    retry: RetryPolicy,
    temp_interpreter_explorer: f64,
    temp_arbiter: f64,
    in_flight: InFlight,
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn ChatBackend>, config: &RunConfig) -> Self {
        LlmGateway {
            backend,
            cache: None,
            retry: config.retry,
            temp_interpreter_explorer: config.temp_interpreter_explorer,
            temp_arbiter: config.temp_arbiter,
            in_flight: InFlight::new(config.max_in_flight),
        }
    }

    pub fn with_cache(mut self, cache: CompletionCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn temperature_for(&self, role: Role) -> f64 {
        if role.is_arbiter() {
            self.temp_arbiter
        } else {
            self.temp_interpreter_explorer
        }
    }

    /// Calls the model for `role` at its configured temperature, consulting the
    /// cache when one is attached. Pass `fresh = true` to skip the cache lookup
    /// (used when re-asking after an unparseable reply).
    pub fn call(&self, role: Role, prompt: &str, meter: &mut Meter, fresh: bool) -> Result<Completion, GatewayError> {
        let temperature = self.temperature_for(role);
        if fresh {
            let c = self.complete(role, prompt, temperature, meter)?;
            if let Some(cache) = &self.cache {
                cache.put(&cache_key(role, prompt, temperature, &self.backend.id()), &c);
            }
            Ok(c)
        } else {
            self.cached_complete(role, prompt, temperature, meter)
        }
    }

    /// Serves identical requests from the cache without touching the backend
    /// or the call counter. Without a cache this is [`Self::complete`].
    pub fn cached_complete(
        &self,
        role: Role,
        prompt: &str,
        temperature: f64,
        meter: &mut Meter,
    ) -> Result<Completion, GatewayError> {
        let Some(cache) = &self.cache else {
            return self.complete(role, prompt, temperature, meter);
        };
        let key = cache_key(role, prompt, temperature, &self.backend.id());
        match cache.get(&key) {
            Ok(Some(hit)) => {
                meter.counters.cache_hits += 1;
                return Ok(hit);
            }
            Ok(None) => {}
            Err(e) => warn!(error = %e, "ignoring corrupt cache entry"),
        }
        let c = self.complete(role, prompt, temperature, meter)?;
        cache.put(&key, &c);
        Ok(c)
    }

    /// One counted model invocation, retrying transient failures with
    /// exponential backoff. Retries are tallied separately from calls.
    pub fn complete(
        &self,
        role: Role,
        prompt: &str,
        temperature: f64,
        meter: &mut Meter,
    ) -> Result<Completion, GatewayError> {
        meter.check_budget()?;
        let req = ChatRequest {
            role,
            prompt,
            temperature,
            question_id: &meter.question_id,
        };
        let mut attempt = 0u32;
        loop {
            let result = {
                let _permit = self.in_flight.acquire();
                self.backend.complete(&req)
            };
            match result {
                Ok(c) => {
                    meter.counters.llm_calls += 1;
                    meter.counters.tokens_in += c.tokens_in;
                    meter.counters.tokens_out += c.tokens_out;
                    debug!(%role, attempt, tokens_in = c.tokens_in, tokens_out = c.tokens_out, "completion");
                    return Ok(c);
                }
                Err(BackendError::Transient(msg)) => {
                    if attempt >= self.retry.max_retries {
                        return Err(GatewayError::TransientBackendError {
                            attempts: attempt + 1,
                            last: msg,
                        });
                    }
                    let delay = self.retry.delay_ms(attempt);
                    warn!(%role, attempt = attempt + 1, delay_ms = delay, error = %msg, "retrying");
                    meter.counters.retries += 1;
                    attempt += 1;
                    if delay > 0 {
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
                Err(BackendError::Auth(msg)) => return Err(GatewayError::AuthError(msg)),
                Err(BackendError::Fatal(msg)) => return Err(GatewayError::Backend(msg)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::{InjectedError, MockBackend};

    fn fast_config() -> RunConfig {
        RunConfig {
            retry: RetryPolicy {
                max_retries: 3,
                base_delay_ms: 0,
                max_delay_ms: 0,
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn retries_then_succeeds_without_double_counting() {
        let mock = Arc::new(MockBackend::new());
        mock.push_error(None, Role::Explorer, InjectedError::Transient);
        mock.push_error(None, Role::Explorer, InjectedError::Transient);
        mock.push(Role::Explorer, "done");
        let gw = LlmGateway::new(mock.clone(), &fast_config());
        let mut meter = Meter::new("q", Budget::default());
        let c = gw.call(Role::Explorer, "p", &mut meter, false).unwrap();
        assert_eq!(c.text, "done");
        assert_eq!(meter.counters.llm_calls, 1);
        assert_eq!(meter.counters.retries, 2);
        assert_eq!(mock.requests().len(), 3);
    }

    #[test]
    fn retry_limit_exhausted() {
        let mock = Arc::new(MockBackend::new());
        for _ in 0..4 {
            mock.push_error(None, Role::Explorer, InjectedError::Transient);
        }
        mock.push(Role::Explorer, "never reached");
        let gw = LlmGateway::new(mock.clone(), &fast_config());
        let mut meter = Meter::new("q", Budget::default());
        let err = gw.call(Role::Explorer, "p", &mut meter, false).unwrap_err();
        assert_eq!(
            err,
            GatewayError::TransientBackendError {
                attempts: 4,
                last: "injected by mock script".into()
            }
        );
        assert_eq!(meter.counters.llm_calls, 0);
    }

    #[test]
    fn auth_is_not_retried() {
        let mock = Arc::new(MockBackend::new());
        mock.push_error(None, Role::Interpreter, InjectedError::Auth);
        mock.push(Role::Interpreter, "x");
        let gw = LlmGateway::new(mock.clone(), &fast_config());
        let mut meter = Meter::new("q", Budget::default());
        assert!(matches!(
            gw.call(Role::Interpreter, "p", &mut meter, false),
            Err(GatewayError::AuthError(_))
        ));
        assert_eq!(mock.requests().len(), 1);
    }

    #[test]
    fn arbiter_roles_use_arbiter_temperature() {
        let mock = Arc::new(MockBackend::new());
        for r in Role::ALL {
            mock.push(r, "x");
        }
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default());
        let mut meter = Meter::new("q", Budget::default());
        for r in Role::ALL {
            gw.call(r, "p", &mut meter, false).unwrap();
        }
        let temps: Vec<(Role, f64)> = mock.requests().iter().map(|r| (r.role, r.temperature)).collect();
        assert_eq!(
            temps,
            vec![
                (Role::Interpreter, 1.0),
                (Role::Explorer, 1.0),
                (Role::Adjudicator, 0.0),
                (Role::Answerer, 0.0)
            ]
        );
    }

    #[test]
    fn cache_hit_is_not_counted() {
        let mock = Arc::new(MockBackend::new());
        mock.push(Role::Explorer, "a");
        mock.push(Role::Explorer, "b");
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default()).with_cache(CompletionCache::in_memory());
        let mut meter = Meter::new("q", Budget::default());
        assert_eq!(gw.call(Role::Explorer, "p", &mut meter, false).unwrap().text, "a");
        assert_eq!(gw.call(Role::Explorer, "p", &mut meter, false).unwrap().text, "a");
        assert_eq!(meter.counters.llm_calls, 1);
        assert_eq!(meter.counters.cache_hits, 1);
    }

    #[test]
    fn cache_misses_on_temperature() {
        let mock = Arc::new(MockBackend::new());
        mock.push(Role::Explorer, "a");
        mock.push(Role::Explorer, "b");
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default()).with_cache(CompletionCache::in_memory());
        let mut meter = Meter::new("q", Budget::default());
        assert_eq!(
            gw.cached_complete(Role::Explorer, "p", 1.0, &mut meter).unwrap().text,
            "a"
        );
        assert_eq!(
            gw.cached_complete(Role::Explorer, "p", 0.5, &mut meter).unwrap().text,
            "b"
        );
        assert_eq!(meter.counters.llm_calls, 2);
    }

    #[test]
    fn cache_disabled_means_two_live_calls() {
        let mock = Arc::new(MockBackend::new());
        mock.push(Role::Explorer, "a");
        mock.push(Role::Explorer, "b");
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default());
        let mut meter = Meter::new("q", Budget::default());
        gw.call(Role::Explorer, "p", &mut meter, false).unwrap();
        assert_eq!(gw.call(Role::Explorer, "p", &mut meter, false).unwrap().text, "b");
        assert_eq!(meter.counters.llm_calls, 2);
    }

    #[test]
    fn corrupt_cache_falls_through() {
        let dir = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockBackend::new());
        mock.push(Role::Explorer, "live");
        let key = cache_key(Role::Explorer, "p", 1.0, "mock");
        std::fs::write(dir.path().join(format!("{key}.json")), "garbage").unwrap();
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default())
            .with_cache(CompletionCache::persistent(dir.path()).unwrap());
        let mut meter = Meter::new("q", Budget::default());
        assert_eq!(gw.call(Role::Explorer, "p", &mut meter, false).unwrap().text, "live");
        assert_eq!(meter.counters.llm_calls, 1);
    }

    #[test]
    fn budget_stops_calls() {
        let mock = Arc::new(MockBackend::new());
        mock.push(Role::Explorer, "a");
        mock.push(Role::Explorer, "b");
        let gw = LlmGateway::new(mock.clone(), &RunConfig::default());
        let mut meter = Meter::new(
            "q",
            Budget {
                max_calls: 1,
                max_tokens: 1_000,
            },
        );
        gw.call(Role::Explorer, "p", &mut meter, false).unwrap();
        assert!(matches!(
            gw.call(Role::Explorer, "p", &mut meter, false),
            Err(GatewayError::BudgetExceeded { what: "calls", .. })
        ));
    }
}
