//! Remote providers and the retry loop.

use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{ChatRequest, ChatResponse, GatewayError};

/// Outcome of a single provider attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum CallError {
    /// Worth retrying: network failure, timeout, 429 or 5xx.
    Transient(String),
    /// Not worth retrying: authentication failure, bad request.
    Rejected(String),
    /// The provider answered with something that is not a chat completion.
    Protocol(String),
}

pub trait Provider: Send + Sync {
    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, CallError>;
}

/// Exponential backoff: attempt `k` (0-based) waits `base * 2^k` scaled by a
/// uniform factor in `[0.5, 1.0)` when jitter is on.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let raw = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        if self.jitter {
            raw.mul_f64(rand::rng().random_range(0.5..1.0))
        } else {
            raw
        }
    }

    pub fn run(
        &self,
        provider: &dyn Provider,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let attempts = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match provider.call(request) {
                Ok(r) => return Ok(r),
                Err(CallError::Protocol(m)) => return Err(GatewayError::Protocol(m)),
                Err(CallError::Rejected(m)) => {
                    return Err(GatewayError::Provider {
                        attempts: attempt + 1,
                        message: m,
                    })
                }
                Err(CallError::Transient(m)) => {
                    log::warn!("provider attempt {} of {attempts} failed: {m}", attempt + 1);
                    last = m;
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.delay(attempt));
                    }
                }
            }
        }
        Err(GatewayError::Provider {
            attempts,
            message: last,
        })
    }
}

/// OpenAI-compatible `chat/completions` endpoint.
pub struct HttpProvider {
    url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            url: url.into(),
            api_key: api_key.into(),
            agent,
        }
    }
}

/// Pulls `choices[0].message.content` out of a completion payload.
pub fn extract_completion(payload: &Value) -> Result<ChatResponse, CallError> {
    let text = payload
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| CallError::Protocol("missing choices[0].message.content".into()))?;
    let mut response = ChatResponse::new(text);
    if let Some(usage) = payload.get("usage").and_then(Value::as_object) {
        for (k, v) in usage {
            response.provider_meta.insert(k.clone(), v.to_string());
        }
    }
    Ok(response)
}

impl Provider for HttpProvider {
    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role, "content": m.content}))
            .collect();
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": messages,
        });
        let started = std::time::Instant::now();
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| CallError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| CallError::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(CallError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(CallError::Rejected(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            )));
        }
        let payload: Value = serde_json::from_str(&text)
            .map_err(|e| CallError::Protocol(format!("invalid JSON: {e}")))?;
        let mut response = extract_completion(&payload)?;
        response.provider_meta.insert(
            "latency_ms".into(),
            started.elapsed().as_millis().to_string(),
        );
        Ok(response)
    }
}
