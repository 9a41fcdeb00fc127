//! Chat-completion and embedding client for OpenAI-compatible endpoints.
//!
//! Every request is content-addressed ([`CacheKey`]) and answered from a
//! [`DiskCache`] when possible, so a run with a warm cache can be replayed
//! with [`Gateway::offline`] and no transport at all. Live calls retry
//! transient failures with exponential backoff and never retry
//! authentication errors. Every call is recorded in a log that tests use to
//! prove hermeticity.

mod cache;
mod transport;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use verirank_core::judge::{ChatError, ChatModel, ChatRequest, Embedder};
use verirank_core::model::content_digest;

pub use cache::{CacheKey, DiskCache};
pub use transport::{HttpResponse, MockTransport, Transport, TransportError, UreqTransport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub embedding_model: String,
    pub max_concurrency: usize,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env: None,
            embedding_model: "embedding".into(),
            max_concurrency: 8,
            timeout_secs: 120,
        }
    }
}

impl EndpointConfig {
    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_secs(1),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Wait after the `attempt`-th failure (1-based): `base * factor^(attempt-1)`.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base * self.factor.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    Chat,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: CallKind,
    pub key: String,
    pub cache_hit: bool,
    /// Transport attempts made; zero for cache hits and offline misses.
    pub attempts: u32,
    /// Whether any attempt went through a network transport.
    pub network: bool,
    pub ok: bool,
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

type Sleeper = dyn Fn(Duration) + Send + Sync;

pub struct Gateway {
    endpoint: EndpointConfig,
    transport: Option<Arc<dyn Transport>>,
    cache: Option<DiskCache>,
    offline: bool,
    retry: RetryPolicy,
    sleeper: Arc<Sleeper>,
    limiter: Limiter,
    log: Mutex<Vec<CallRecord>>,
}

impl Gateway {
    pub fn new(endpoint: EndpointConfig, transport: Arc<dyn Transport>) -> Self {
        let max = endpoint.max_concurrency.max(1);
        Gateway {
            endpoint,
            transport: Some(transport),
            cache: None,
            offline: false,
            retry: RetryPolicy::default(),
            sleeper: Arc::new(std::thread::sleep),
            limiter: Limiter {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                max,
            },
            log: Mutex::new(Vec::new()),
        }
    }

    /// Live gateway over HTTP.
    pub fn http(endpoint: EndpointConfig) -> Self {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs(endpoint.timeout_secs)));
        Gateway::new(endpoint, transport)
    }

    /// Cache-only gateway: misses fail with [`ChatError::CacheMiss`].
    pub fn offline(endpoint: EndpointConfig, cache: DiskCache) -> Self {
        let mut g = Gateway::new(endpoint, Arc::new(MockTransport::synthetic()));
        g.transport = None;
        g.offline = true;
        g.cache = Some(cache);
        g
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().expect("log lock").clone()
    }

    /// Calls that reached a network transport.
    pub fn network_calls(&self) -> usize {
        self.call_log().iter().filter(|r| r.network).count()
    }

    fn record(&self, r: CallRecord) {
        self.log.lock().expect("log lock").push(r);
    }

    fn api_key(&self) -> Result<Option<String>, ChatError> {
        match &self.endpoint.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ChatError::Auth(format!("environment variable {var} is not set"))),
        }
    }

    /// Cache lookup, then a live call with retries, then cache fill.
    fn cached_call(
        &self,
        kind: CallKind,
        key: CacheKey,
        path: &str,
        body: Value,
        extract: impl Fn(&Value) -> Result<String, ChatError>,
    ) -> Result<String, ChatError> {
        let mut rec = CallRecord {
            kind,
            key: key.digest.clone(),
            cache_hit: false,
            attempts: 0,
            network: false,
            ok: false,
        };
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            rec.cache_hit = true;
            rec.ok = true;
            self.record(rec);
            return Ok(hit);
        }
        let transport = match (&self.transport, self.offline) {
            (Some(t), false) => t,
            _ => {
                self.record(rec);
                return Err(ChatError::CacheMiss(key.digest));
            }
        };
        let result = self.call_with_retry(transport.as_ref(), path, &body, &extract, &mut rec);
        rec.ok = result.is_ok();
        self.record(rec);
        let text = result?;
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&key, &text) {
                tracing::warn!("cache write failed: {e}");
            }
        }
        Ok(text)
    }

    fn call_with_retry(
        &self,
        transport: &dyn Transport,
        path: &str,
        body: &Value,
        extract: &dyn Fn(&Value) -> Result<String, ChatError>,
        rec: &mut CallRecord,
    ) -> Result<String, ChatError> {
        let api_key = self.api_key()?;
        let url = self.endpoint.url(path);
        let _permit = self.limiter.acquire();
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            rec.attempts = attempt;
            rec.network |= transport.is_network();
            let outcome = match transport.post(&url, api_key.as_deref(), body) {
                Err(TransportError(e)) => Err((ChatError::Transient(e), None)),
                Ok(resp) => classify(resp, extract),
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err((e, retry_after)) if e.is_transient() => {
                    last = e.to_string();
                    if attempt < self.retry.max_attempts {
                        let mut wait = self.retry.delay(attempt);
                        if let Some(s) = retry_after.filter(|s| s.is_finite() && *s > 0.0) {
                            wait = wait.max(Duration::from_secs_f64(s.min(300.0)));
                        }
                        tracing::debug!(attempt, ?wait, "retrying: {e}");
                        (self.sleeper)(wait);
                    }
                }
                Err((e, _)) => return Err(e),
            }
        }
        Err(ChatError::Exhausted {
            attempts: self.retry.max_attempts.max(1),
            last,
        })
    }

    pub fn complete_chat(&self, request: &ChatRequest) -> Result<String, ChatError> {
        request.validate()?;
        let key = CacheKey::for_chat(&self.endpoint.base_url, request);
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "seed": nonce_seed(&request.seed_nonce),
        });
        self.cached_call(CallKind::Chat, key, "chat/completions", body, |v| {
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| ChatError::Malformed("missing choices[0].message.content".into()))
        })
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, ChatError> {
        let model = &self.endpoint.embedding_model;
        let key = CacheKey::for_embedding(&self.endpoint.base_url, model, text);
        let body = json!({ "model": model, "input": text });
        let raw = self.cached_call(CallKind::Embedding, key, "embeddings", body, |v| {
            let arr = v
                .pointer("/data/0/embedding")
                .and_then(Value::as_array)
                .filter(|a| !a.is_empty())
                .ok_or_else(|| ChatError::Malformed("missing data[0].embedding".into()))?;
            if arr.iter().any(|x| !x.as_f64().is_some_and(f64::is_finite)) {
                return Err(ChatError::Malformed("non-numeric embedding".into()));
            }
            Ok(Value::Array(arr.clone()).to_string())
        })?;
        serde_json::from_str(&raw).map_err(|e| ChatError::Malformed(format!("cached embedding: {e}")))
    }
}

/// Provider seed derived from the nonce, so voting passes differ upstream too.
fn nonce_seed(nonce: &str) -> u32 {
    u32::from_str_radix(&content_digest(nonce.as_bytes())[..8], 16).expect("hex digest")
}

type Classified = Result<String, (ChatError, Option<f64>)>;

fn classify(resp: HttpResponse, extract: &dyn Fn(&Value) -> Result<String, ChatError>) -> Classified {
    let excerpt: String = resp.body.chars().take(300).collect();
    match resp.status {
        200..=299 => {
            let v: Value = serde_json::from_str(&resp.body)
                .map_err(|e| (ChatError::Malformed(format!("{e}: {excerpt}")), None))?;
            extract(&v).map_err(|e| (e, None))
        }
        401 | 403 => Err((ChatError::Auth(format!("HTTP {}: {excerpt}", resp.status)), None)),
        408 | 409 | 425 | 429 | 500..=599 => Err((
            ChatError::Transient(format!("HTTP {}: {excerpt}", resp.status)),
            resp.retry_after,
        )),
        s => Err((ChatError::InvalidRequest(format!("HTTP {s}: {excerpt}")), None)),
    }
}

impl ChatModel for Gateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        self.complete_chat(request)
    }
}

impl Embedder for Gateway {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ChatError> {
        Gateway::embed(self, text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let d: Vec<u64> = (1..=4).map(|a| p.delay(a).as_secs()).collect();
        assert_eq!(d, [1, 2, 4, 8]);
    }

    #[test]
    fn urls_join_cleanly() {
        let e = EndpointConfig {
            base_url: "http://h/v1/".into(),
            ..Default::default()
        };
        assert_eq!(e.url("chat/completions"), "http://h/v1/chat/completions");
    }
}
