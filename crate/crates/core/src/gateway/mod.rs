//! Chat-completion access with a content-addressed cache.
//!
//! Three modes share one code path:
//! * `live` calls the configured provider on a cache miss and records the
//!   answer before returning it;
//! * `replay` serves from the cache only and fails on a miss;
//! * `stub` behaves like `live` with the offline [`StubProvider`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

mod cache;
mod canonical;
mod provider;
mod stub;

pub use cache::{ResponseCache, SEPARATOR};
pub use canonical::{canonical_decode, canonical_encode, format_number, CacheKey};
pub use provider::{extract_completion, CallError, HttpProvider, Provider, RetryPolicy};
pub use stub::StubProvider;

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache miss for {digest}")]
    CacheMiss { digest: String },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        temperature: f64,
        messages: Vec<Message>,
    ) -> Result<Self, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {temperature}"
            )));
        }
        Ok(ChatRequest {
            model: model.into(),
            temperature,
            messages,
        })
    }

    /// Single user message at temperature 0.
    pub fn user(model: impl Into<String>, content: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            temperature: 0.0,
            messages: vec![Message::user(content)],
        }
    }

    pub fn key(&self) -> CacheKey {
        CacheKey::of(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub provider_meta: BTreeMap<String, String>,
}

impl ChatResponse {
    pub fn new(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            provider_meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Live,
    Replay,
    Stub,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Replay => "replay",
            GatewayMode::Stub => "stub",
        })
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "replay" => Ok(GatewayMode::Replay),
            "stub" => Ok(GatewayMode::Stub),
            other => Err(format!(
                "unknown mode `{other}` (expected live, replay or stub)"
            )),
        }
    }
}

/// Shareable across threads; all state is the on-disk cache plus counters.
pub struct Gateway {
    mode: GatewayMode,
    cache: ResponseCache,
    provider: Option<Arc<dyn Provider>>,
    retry: RetryPolicy,
    remote_calls: AtomicUsize,
}

impl Gateway {
    pub fn replay(cache: ResponseCache) -> Self {
        Gateway {
            mode: GatewayMode::Replay,
            cache,
            provider: None,
            retry: RetryPolicy::default(),
            remote_calls: AtomicUsize::new(0),
        }
    }

    pub fn stub(cache: ResponseCache) -> Self {
        Self::with_provider(
            GatewayMode::Stub,
            cache,
            Arc::new(StubProvider),
            RetryPolicy::default(),
        )
    }

    pub fn live(cache: ResponseCache, provider: Arc<dyn Provider>, retry: RetryPolicy) -> Self {
        Self::with_provider(GatewayMode::Live, cache, provider, retry)
    }

    fn with_provider(
        mode: GatewayMode,
        cache: ResponseCache,
        provider: Arc<dyn Provider>,
        retry: RetryPolicy,
    ) -> Self {
        Gateway {
            mode,
            cache,
            provider: Some(provider),
            retry,
            remote_calls: AtomicUsize::new(0),
        }
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Provider invocations made so far (cache hits excluded).
    pub fn remote_calls(&self) -> usize {
        self.remote_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if let Some(text) = self.cache.get(request)? {
            let mut r = ChatResponse::new(text);
            r.provider_meta.insert("cache".into(), "hit".into());
            return Ok(r);
        }
        let Some(provider) = self.provider.as_deref() else {
            return Err(GatewayError::CacheMiss {
                digest: request.key().to_string(),
            });
        };
        self.remote_calls.fetch_add(1, Ordering::SeqCst);
        let response = self.retry.run(provider, request)?;
        self.cache.put(request, &response.text)?;
        Ok(response)
    }

    /// Runs `requests` with at most `max_in_flight` outstanding at once
    /// (0 is treated as 1). Results line up with the input.
    pub fn batch_complete(
        &self,
        requests: &[ChatRequest],
        max_in_flight: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        let workers = max_in_flight.max(1).min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<Result<ChatResponse, GatewayError>>> = vec![None; requests.len()];
        let done: Vec<Vec<(usize, Result<ChatResponse, GatewayError>)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|_| {
                        scope.spawn(|| {
                            let mut local = Vec::new();
                            loop {
                                let i = next.fetch_add(1, Ordering::SeqCst);
                                if i >= requests.len() {
                                    break local;
                                }
                                local.push((i, self.complete(&requests[i])));
                            }
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("gateway worker panicked"))
                    .collect()
            });
        for (i, r) in done.into_iter().flatten() {
            slots[i] = Some(r);
        }
        slots
            .into_iter()
            .map(|s| s.expect("every index claimed"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;
    use std::time::Duration;

    /// Echoes the prompt, tracking concurrency; fails on prompts containing
    /// "fail".
    #[derive(Default)]
    struct Echo {
        live: AtomicUsize,
        peak: AtomicUsize,
        order: Mutex<Vec<String>>,
    }

    impl Provider for Echo {
        fn call(&self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
            let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            let content = request.messages[0].content.clone();
            self.order.lock().unwrap().push(content.clone());
            self.live.fetch_sub(1, Ordering::SeqCst);
            if content.contains("fail") {
                Err(CallError::Rejected("refused".into()))
            } else {
                Ok(ChatResponse::new(format!("echo:{content}")))
            }
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 2,
            base_delay: Duration::from_millis(1),
            jitter: false,
        }
    }

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new("m", 0.0, vec![]).is_err());
        assert!(ChatRequest::new("m", -1.0, vec![Message::user("x")]).is_err());
        assert!(ChatRequest::new("m", f64::NAN, vec![Message::user("x")]).is_err());
        assert_eq!(ChatRequest::user("m", "x").temperature, 0.0);
    }

    #[test]
    fn live_then_cache_hit_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let echo = Arc::new(Echo::default());
        let g = Gateway::live(ResponseCache::new(dir.path()), echo.clone(), fast());
        let r = ChatRequest::user("m", "hi");
        assert_eq!(g.complete(&r).unwrap().text, "echo:hi");
        assert_eq!(g.complete(&r).unwrap().text, "echo:hi");
        assert_eq!(g.remote_calls(), 1);
        let replay = Gateway::replay(ResponseCache::new(dir.path()));
        assert_eq!(replay.complete(&r).unwrap().text, "echo:hi");
    }

    #[test]
    fn replay_miss_names_digest() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gateway::replay(ResponseCache::new(dir.path()));
        let r = ChatRequest::user("m", "hi");
        assert_eq!(
            g.complete(&r),
            Err(GatewayError::CacheMiss {
                digest: r.key().to_string()
            })
        );
    }

    #[test]
    fn sequential_batch_keeps_order() {
        let dir = tempfile::tempdir().unwrap();
        let echo = Arc::new(Echo::default());
        let g = Gateway::live(ResponseCache::new(dir.path()), echo.clone(), fast());
        let reqs: Vec<_> = (0..10)
            .map(|i| ChatRequest::user("m", format!("q{i}")))
            .collect();
        let out = g.batch_complete(&reqs, 1);
        let expected: Vec<String> = (0..10).map(|i| format!("q{i}")).collect();
        assert_eq!(*echo.order.lock().unwrap(), expected);
        assert_eq!(echo.peak.load(Ordering::SeqCst), 1);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap().text, format!("echo:q{i}"));
        }
    }

    #[test]
    fn concurrent_batch_matches_sequential_oracle() {
        let seq_dir = tempfile::tempdir().unwrap();
        let par_dir = tempfile::tempdir().unwrap();
        let reqs: Vec<_> = (0..10)
            .map(|i| ChatRequest::user("m", format!("q{i}")))
            .collect();
        let seq = Gateway::live(
            ResponseCache::new(seq_dir.path()),
            Arc::new(Echo::default()),
            fast(),
        )
        .batch_complete(&reqs, 1);
        let echo = Arc::new(Echo::default());
        let par = Gateway::live(ResponseCache::new(par_dir.path()), echo.clone(), fast())
            .batch_complete(&reqs, 4);
        assert_eq!(seq, par);
        assert!(echo.peak.load(Ordering::SeqCst) <= 4);
        let replay = Gateway::replay(ResponseCache::new(par_dir.path()));
        for (r, s) in reqs.iter().zip(&seq) {
            assert_eq!(replay.complete(r).unwrap().text, s.as_ref().unwrap().text);
        }
    }

    #[test]
    fn partial_failure_is_per_item() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gateway::live(
            ResponseCache::new(dir.path()),
            Arc::new(Echo::default()),
            fast(),
        );
        let reqs: Vec<_> = ["a", "b", "fail", "d", "e"]
            .iter()
            .map(|c| ChatRequest::user("m", *c))
            .collect();
        let out = g.batch_complete(&reqs, 3);
        assert_eq!(out.iter().filter(|r| r.is_ok()).count(), 4);
        assert!(matches!(out[2], Err(GatewayError::Provider { .. })));
    }

    #[test]
    fn mode_names() {
        for m in [GatewayMode::Live, GatewayMode::Replay, GatewayMode::Stub] {
            assert_eq!(m.to_string().parse::<GatewayMode>().unwrap(), m);
        }
        assert!("offline".parse::<GatewayMode>().is_err());
    }
}
