//! Chat-completion client: OpenAI-compatible HTTP transport, a scripted
//! deterministic mock, retries with exponential backoff, and order-preserving
//! batches under an in-flight bound.

mod batch;
mod http;
mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use batch::parallel_map;
pub use http::HttpBackend;
pub use mock::{MockBackend, MockFailure, MockFailureKind, MockRule, MockScript, WeightedResponse};

pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("request rejected ({status}): {message}")]
    Request { status: u16, message: String },
    #[error("malformed completion: {0}")]
    Protocol(String),
    #[error("invalid mock script: {0}")]
    MockScript(String),
}

impl LlmError {
    /// Transport failures and 5xx responses are retried; everything else is final.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::Server { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Correlates log lines with the sample that produced the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
            correlation_id: None,
        }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn correlation_id(mut self, id: impl Into<String>) -> Self {
        self.correlation_id = Some(id.into());
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Never read from config files; set from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_max_in_flight() -> usize {
    8
}

fn default_max_retries() -> u32 {
    3
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "lift".into(),
            api_key: None,
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_max_in_flight(),
            max_retries: default_max_retries(),
        }
    }
}

impl EndpointConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_in_flight == 0 {
            return Err(LlmError::InvalidRequest("max_in_flight must be >= 1".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(LlmError::InvalidRequest("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// One attempt at a completion; retries and concurrency live in [`ChatClient`].
pub trait ChatBackend: Send + Sync {
    fn complete(&self, model: &str, req: &ChatRequest) -> Result<String, LlmError>;
}

/// `base * 2^attempt`, jittered by ±`jitter`, capped at `cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
    pub jitter: f64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            cap: Duration::from_secs(8),
            jitter: 0.2,
        }
    }
}

impl Backoff {
    pub const NONE: Backoff = Backoff {
        base: Duration::ZERO,
        cap: Duration::ZERO,
        jitter: 0.0,
    };

    pub fn delay(&self, attempt: u32, unit_jitter: f64) -> Duration {
        let raw = self.base.as_secs_f64() * 2f64.powi(attempt.min(30) as i32);
        let jittered = raw * (1.0 + self.jitter * (2.0 * unit_jitter - 1.0));
        Duration::from_secs_f64(jittered.min(self.cap.as_secs_f64()).max(0.0))
    }
}

/// Counting semaphore bounding concurrent backend calls across all callers.
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Clone)]
pub struct ChatClient {
    backend: Arc<dyn ChatBackend>,
    model: String,
    max_retries: u32,
    backoff: Backoff,
    in_flight: Arc<InFlight>,
}

impl ChatClient {
    pub fn new(backend: Arc<dyn ChatBackend>, cfg: &EndpointConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        Ok(Self {
            backend,
            model: cfg.model_name.clone(),
            max_retries: cfg.max_retries,
            backoff: Backoff::default(),
            in_flight: Arc::new(InFlight {
                limit: cfg.max_in_flight,
                active: Mutex::new(0),
                freed: Condvar::new(),
            }),
        })
    }

    pub fn http(cfg: &EndpointConfig) -> Result<Self, LlmError> {
        Self::new(Arc::new(HttpBackend::new(cfg)), cfg)
    }

    /// Mock-backed client: no backoff delay, same retry and in-flight limits.
    pub fn mock(script: MockScript, cfg: &EndpointConfig) -> Result<(Self, Arc<MockBackend>), LlmError> {
        let backend = Arc::new(MockBackend::new(script)?);
        let client = Self::new(backend.clone(), cfg)?.with_backoff(Backoff::NONE);
        Ok((client, backend))
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn max_in_flight(&self) -> usize {
        self.in_flight.limit
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<String, LlmError> {
        req.validate()?;
        let id = req.correlation_id.as_deref().unwrap_or("-");
        let mut attempt = 0;
        loop {
            let result = {
                let _slot = self.in_flight.acquire();
                log::debug!(
                    "chat id={id} attempt={attempt} model={} temperature={} user_bytes={}",
                    self.model,
                    req.temperature,
                    req.user.len()
                );
                self.backend.complete(&self.model, req)
            };
            match result {
                Ok(text) => {
                    log::debug!("chat id={id} ok response_bytes={}", text.len());
                    return Ok(text);
                }
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.backoff.delay(attempt, rand::rng().random());
                    log::warn!("chat id={id} attempt={attempt} failed: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => {
                    log::warn!("chat id={id} failed after {} attempt(s): {e}", attempt + 1);
                    return Err(e);
                }
            }
        }
    }

    /// Runs every request; `out[i]` answers `reqs[i]`, and a failed item does
    /// not affect the others.
    pub fn chat_batch(&self, reqs: &[ChatRequest]) -> Vec<Result<String, LlmError>> {
        parallel_map(reqs, self.max_in_flight(), |r| self.chat(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
        error: LlmError,
    }

    impl ChatBackend for Flaky {
        fn complete(&self, _: &str, _: &ChatRequest) -> Result<String, LlmError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.error.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn client(backend: Arc<Flaky>, retries: u32) -> ChatClient {
        let cfg = EndpointConfig {
            max_retries: retries,
            ..EndpointConfig::default()
        };
        ChatClient::new(backend, &cfg).unwrap().with_backoff(Backoff::NONE)
    }

    fn flaky(fail_first: usize, error: LlmError) -> Arc<Flaky> {
        Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            fail_first,
            error,
        })
    }

    #[test]
    fn retries_stop_at_the_bound() {
        let b = flaky(usize::MAX, LlmError::Transport("down".into()));
        let err = client(b.clone(), 3).chat(&ChatRequest::new("s", "u")).unwrap_err();
        assert!(matches!(err, LlmError::Transport(_)));
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);

        let b = flaky(
            2,
            LlmError::Server {
                status: 503,
                message: "busy".into(),
            },
        );
        assert_eq!(client(b.clone(), 3).chat(&ChatRequest::new("s", "u")).unwrap(), "ok");
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let b = flaky(
            usize::MAX,
            LlmError::Request {
                status: 400,
                message: "bad".into(),
            },
        );
        let err = client(b.clone(), 5).chat(&ChatRequest::new("s", "u")).unwrap_err();
        assert!(matches!(err, LlmError::Request { status: 400, .. }));
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn request_validation() {
        let b = flaky(0, LlmError::Transport(String::new()));
        let c = client(b.clone(), 0);
        assert!(c.chat(&ChatRequest::new("s", "u").temperature(2.5)).is_err());
        assert!(c.chat(&ChatRequest::new("s", "u").max_tokens(0)).is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 0);
        let bad = EndpointConfig {
            max_in_flight: 0,
            ..EndpointConfig::default()
        };
        assert!(ChatClient::new(b, &bad).is_err());
    }

    #[test]
    fn backoff_schedule() {
        let b = Backoff::default();
        assert_eq!(b.delay(0, 0.5), Duration::from_millis(500));
        assert_eq!(b.delay(2, 0.5), Duration::from_secs(2));
        assert_eq!(b.delay(10, 0.5), Duration::from_secs(8));
        assert_eq!(b.delay(0, 1.0), Duration::from_millis(600));
        assert_eq!(b.delay(0, 0.0), Duration::from_millis(400));
    }
}
