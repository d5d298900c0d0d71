//! Chat-completion client: sampling parameters, seed derivation, retries
//! with jittered exponential backoff, and order-preserving bounded batches.

mod http;
pub mod mock;

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use http::{ChatMessage, ChatRequestBody, ChatResponseBody, Choice, EndpointConfig, HttpBackend};
pub use mock::{FixtureBackend, MockFixture, MockServer};

/// Decoding parameters sent with every request. Defaults are the values the
/// generation runs used: temperature 0.7, top-p 1, top-k 10000, repetition
/// penalty 1, typical-p 0.995.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub repetition_penalty: f64,
    pub typical_p: f64,
    pub seed: Option<u64>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        default_params()
    }
}

pub fn default_params() -> SamplingParams {
    SamplingParams {
        temperature: 0.7,
        top_p: 1.0,
        top_k: 10_000,
        repetition_penalty: 1.0,
        typical_p: 0.995,
        seed: None,
    }
}

impl SamplingParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed: Some(seed), ..self }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |what: &str| Err(GatewayError::InvalidRequest(format!("{what} out of range: {self:?}")));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p");
        }
        if self.top_k < 1 {
            return bad("top_k");
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return bad("repetition_penalty");
        }
        if !(self.typical_p > 0.0 && self.typical_p <= 1.0) {
            return bad("typical_p");
        }
        Ok(())
    }
}

/// Per-dialogue seed: `base_seed + job_index`, wrapping on overflow.
pub fn derive_seed(base_seed: u64, job_index: u64) -> u64 {
    base_seed.wrapping_add(job_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 1_000, jitter: true }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { max_retries: 0, base_delay_ms: 0, jitter: false }
    }

    /// Delay before retry number `retry` (1-based): base · 2^(retry-1), and
    /// with jitter a uniform draw from the upper half of that.
    pub fn delay(&self, retry: u32) -> Duration {
        let full = self.base_delay_ms.saturating_mul(1u64 << (retry.saturating_sub(1)).min(20));
        let ms = if self.jitter && full > 1 { rand::rng().random_range(full / 2..=full) } else { full };
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub params: SamplingParams,
    pub endpoint_id: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, params: SamplingParams) -> Self {
        Self { prompt: prompt.into(), params, endpoint_id: "default".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    pub latency: Duration,
    pub attempts: u32,
    pub metadata: serde_json::Value,
}

/// What one backend attempt produced.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub text: String,
    pub metadata: serde_json::Value,
}

/// Failure of a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttemptError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl AttemptError {
    pub fn is_transient(&self) -> bool {
        match self {
            AttemptError::Transport(_) | AttemptError::Timeout => true,
            AttemptError::Status { status, .. } => *status == 429 || *status >= 500,
            AttemptError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("endpoint returned HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, body: String, attempts: u32 },
    #[error("endpoint returned a malformed response: {0}")]
    Malformed(String),
    #[error("endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    fn from_attempt(err: AttemptError, attempts: u32) -> Self {
        match err {
            AttemptError::Transport(message) => GatewayError::Transport { attempts, message },
            AttemptError::Timeout => GatewayError::Timeout { attempts },
            AttemptError::Status { status, body } => GatewayError::Http { status, body, attempts },
            AttemptError::Malformed(m) => GatewayError::Malformed(m),
        }
    }
}

/// A single-shot completion transport.
#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn send(&self, request: &CompletionRequest) -> Result<BackendReply, AttemptError>;
}

#[async_trait]
impl<B: CompletionBackend + ?Sized> CompletionBackend for Arc<B> {
    async fn send(&self, request: &CompletionRequest) -> Result<BackendReply, AttemptError> {
        (**self).send(request).await
    }
}

/// Retrying client over a backend. Cloning shares the concurrency limit.
#[derive(Clone)]
pub struct Gateway<B> {
    backend: Arc<B>,
    retry: RetryPolicy,
    limit: Option<Arc<Semaphore>>,
}

impl<B: CompletionBackend> Gateway<B> {
    pub fn new(backend: B, retry: RetryPolicy) -> Self {
        Self { backend: Arc::new(backend), retry, limit: None }
    }

    /// Caps attempts in flight across every caller sharing this gateway.
    pub fn with_concurrency_limit(mut self, permits: usize) -> Self {
        self.limit = Some(Arc::new(Semaphore::new(permits.max(1))));
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        if request.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        request.params.validate()?;
        let start = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = {
                let _permit = match &self.limit {
                    Some(s) => Some(s.acquire().await.expect("semaphore never closed")),
                    None => None,
                };
                self.backend.send(request).await
            };
            match outcome {
                Ok(reply) if reply.text.trim().is_empty() => return Err(GatewayError::EmptyCompletion),
                Ok(reply) => {
                    return Ok(CompletionResult {
                        text: reply.text,
                        latency: start.elapsed(),
                        attempts,
                        metadata: reply.metadata,
                    })
                }
                Err(err) if err.is_transient() && attempts <= self.retry.max_retries => {
                    let delay = self.retry.delay(attempts);
                    log::warn!("attempt {attempts} failed ({err}); retrying in {delay:?}");
                    tokio::time::sleep(delay).await;
                }
                Err(err) => return Err(GatewayError::from_attempt(err, attempts)),
            }
        }
    }

    /// Runs `requests` with at most `max_in_flight` outstanding; results come
    /// back in request order and failures stay in their own slot.
    pub async fn complete_batch(
        &self,
        requests: &[CompletionRequest],
        max_in_flight: usize,
    ) -> Vec<Result<CompletionResult, GatewayError>> {
        stream::iter(requests).map(|r| self.complete(r)).buffered(max_in_flight.max(1)).collect().await
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

    use super::*;

    fn fast() -> RetryPolicy {
        RetryPolicy { max_retries: 3, base_delay_ms: 1, jitter: false }
    }

    struct Echo;

    #[async_trait]
    impl CompletionBackend for Echo {
        async fn send(&self, r: &CompletionRequest) -> Result<BackendReply, AttemptError> {
            Ok(BackendReply { text: r.prompt.clone(), metadata: serde_json::Value::Null })
        }
    }

    struct Flaky {
        fail_first: u32,
        calls: AtomicU32,
        error: AttemptError,
    }

    #[async_trait]
    impl CompletionBackend for Flaky {
        async fn send(&self, _: &CompletionRequest) -> Result<BackendReply, AttemptError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.error.clone())
            } else {
                Ok(BackendReply { text: "ok".into(), metadata: serde_json::Value::Null })
            }
        }
    }

    fn flaky(fail_first: u32, error: AttemptError) -> Flaky {
        Flaky { fail_first, calls: AtomicU32::new(0), error }
    }

    fn req(p: &str) -> CompletionRequest {
        CompletionRequest::new(p, default_params())
    }

    #[test]
    fn defaults_match_published_parameters() {
        let p = default_params();
        assert_eq!(p.temperature, 0.7);
        assert_eq!(p.top_p, 1.0);
        assert_eq!(p.top_k, 10_000);
        assert_eq!(p.repetition_penalty, 1.0);
        assert_eq!(p.typical_p, 0.995);
        assert_eq!(p.seed, None);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn param_validation() {
        for bad in [
            SamplingParams { temperature: -0.1, ..default_params() },
            SamplingParams { top_p: 0.0, ..default_params() },
            SamplingParams { top_k: 0, ..default_params() },
            SamplingParams { repetition_penalty: 0.9, ..default_params() },
            SamplingParams { typical_p: 1.5, ..default_params() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(SamplingParams { repetition_penalty: 1.2, ..default_params() }.validate().is_ok());
    }

    #[test]
    fn seed_derivation() {
        assert_eq!(derive_seed(1000, 0), 1000);
        assert_eq!(derive_seed(1000, 5), 1005);
        let seen: HashSet<u64> = (0..1_000_000).map(|i| derive_seed(123_456, i)).collect();
        assert_eq!(seen.len(), 1_000_000);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { max_retries: 3, base_delay_ms: 1000, jitter: false };
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(3), Duration::from_secs(4));
        let j = RetryPolicy { jitter: true, ..p };
        let d = j.delay(2);
        assert!(d >= Duration::from_secs(1) && d <= Duration::from_secs(2));
    }

    #[tokio::test]
    async fn echo() {
        let g = Gateway::new(Echo, fast());
        let r = g.complete(&req("Speaker: Joey | Utterance: hi | Number: 1")).await.unwrap();
        assert_eq!(r.text, "Speaker: Joey | Utterance: hi | Number: 1");
        assert_eq!(r.attempts, 1);
    }

    #[tokio::test]
    async fn retries_until_success() {
        let g = Gateway::new(flaky(2, AttemptError::Transport("reset".into())), fast());
        let r = g.complete(&req("p")).await.unwrap();
        assert_eq!(r.attempts, 3);
    }

    #[tokio::test]
    async fn gives_up_after_limit() {
        let g = Gateway::new(
            flaky(u32::MAX, AttemptError::Transport("down".into())),
            RetryPolicy { max_retries: 2, ..fast() },
        );
        let err = g.complete(&req("p")).await.unwrap_err();
        assert_eq!(err, GatewayError::Transport { attempts: 3, message: "down".into() });
        assert_eq!(g.backend().calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn timeout_and_status_classification() {
        let g = Gateway::new(flaky(u32::MAX, AttemptError::Timeout), RetryPolicy { max_retries: 1, ..fast() });
        assert_eq!(g.complete(&req("p")).await.unwrap_err(), GatewayError::Timeout { attempts: 2 });

        let g = Gateway::new(flaky(u32::MAX, AttemptError::Status { status: 401, body: "no".into() }), fast());
        assert!(matches!(
            g.complete(&req("p")).await.unwrap_err(),
            GatewayError::Http { status: 401, attempts: 1, .. }
        ));

        let g = Gateway::new(flaky(1, AttemptError::Status { status: 503, body: "busy".into() }), fast());
        assert_eq!(g.complete(&req("p")).await.unwrap().attempts, 2);
    }

    struct Empty(AtomicU32);

    #[async_trait]
    impl CompletionBackend for Empty {
        async fn send(&self, _: &CompletionRequest) -> Result<BackendReply, AttemptError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(BackendReply { text: "  \n".into(), metadata: serde_json::Value::Null })
        }
    }

    #[tokio::test]
    async fn empty_completion_is_not_retried() {
        let g = Gateway::new(Empty(AtomicU32::new(0)), fast());
        assert_eq!(g.complete(&req("p")).await.unwrap_err(), GatewayError::EmptyCompletion);
        assert_eq!(g.backend().0.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn rejects_empty_prompt() {
        let g = Gateway::new(Echo, fast());
        assert!(matches!(g.complete(&req(" ")).await, Err(GatewayError::InvalidRequest(_))));
    }

    /// Sleeps a prompt-dependent time and tracks peak concurrency.
    struct Slow {
        now: AtomicUsize,
        peak: AtomicUsize,
    }

    #[async_trait]
    impl CompletionBackend for Slow {
        async fn send(&self, r: &CompletionRequest) -> Result<BackendReply, AttemptError> {
            let cur = self.now.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(cur, Ordering::SeqCst);
            let i: u64 = r.prompt.parse().unwrap();
            tokio::time::sleep(Duration::from_millis((i * 7919) % 13 + 1)).await;
            self.now.fetch_sub(1, Ordering::SeqCst);
            if i == 3 {
                return Err(AttemptError::Malformed("bad".into()));
            }
            Ok(BackendReply { text: format!("reply-{i}"), metadata: serde_json::Value::Null })
        }
    }

    fn slow() -> Slow {
        Slow { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) }
    }

    #[tokio::test]
    async fn batch_orders_and_isolates() {
        let reqs: Vec<_> = (0..10).map(|i| req(&i.to_string())).collect();
        for max in [1, 4] {
            let g = Gateway::new(slow(), fast());
            let out = g.complete_batch(&reqs, max).await;
            assert_eq!(out.len(), 10);
            for (i, r) in out.iter().enumerate() {
                if i == 3 {
                    assert!(r.is_err());
                } else {
                    assert_eq!(r.as_ref().unwrap().text, format!("reply-{i}"));
                }
            }
            assert!(g.backend().peak.load(Ordering::SeqCst) <= max);
            if max == 1 {
                assert_eq!(g.backend().peak.load(Ordering::SeqCst), 1);
            }
        }
    }

    #[tokio::test]
    async fn shared_limit_across_callers() {
        let g = Gateway::new(slow(), fast()).with_concurrency_limit(2);
        let reqs: Vec<_> = (4..12).map(|i| req(&i.to_string())).collect();
        let (a, b) = tokio::join!(g.complete_batch(&reqs, 8), g.complete_batch(&reqs, 8));
        assert_eq!(a.len() + b.len(), 16);
        assert!(g.backend().peak.load(Ordering::SeqCst) <= 2);
    }
}
