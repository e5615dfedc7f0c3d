//! HTTP plumbing for remote models: an OpenAI-style chat transport, retry
//! with exponential backoff, optional request throttling, and the client for
//! the judge's probability endpoint.

use std::time::Duration;

use futures::future::BoxFuture;
use futures::FutureExt;
use thiserror::Error;

use proctor_core::config::{GenerationParams, ModelSpec, ProviderRef, TransportPolicy};
use proctor_core::plan::RunTask;
use proctor_core::prompt::PromptPair;
use proctor_core::record::RawResponse;

use crate::connector::Connector;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    /// Worth another attempt: rate limiting, server trouble, timeouts.
    #[error("{message}")]
    Retryable { message: String },
    /// Retrying cannot help: bad credentials, malformed requests or replies.
    #[error("{message}")]
    Fatal { message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_name: String,
    pub system: String,
    pub user: String,
    pub params: GenerationParams,
    pub seed: u64,
    /// Whether to forward `top_k`; most OpenAI-compatible servers reject it.
    pub include_top_k: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub meta: Option<serde_json::Value>,
}

pub trait ChatTransport: Send + Sync {
    fn chat<'a>(&'a self, request: &'a ChatRequest)
        -> BoxFuture<'a, Result<ChatReply, TransportError>>;
}

/// Spaces permits `1/rps` apart. Waiters queue in arrival order; the wait
/// itself happens outside the lock so slow sleepers don't serialize others.
pub struct RateLimiter {
    interval: Duration,
    next_free: tokio::sync::Mutex<Option<tokio::time::Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next_free: tokio::sync::Mutex::new(None),
        }
    }

    pub async fn acquire(&self) {
        let slot = {
            let mut next_free = self.next_free.lock().await;
            let now = tokio::time::Instant::now();
            let slot = match *next_free {
                Some(at) if at > now => at,
                _ => now,
            };
            *next_free = Some(slot + self.interval);
            slot
        };
        tokio::time::sleep_until(slot).await;
    }
}

fn backoff_delay(policy: &TransportPolicy, attempt: u32) -> Duration {
    // attempt 1 waits the base, each further attempt doubles it.
    let factor = 1u64 << (attempt - 1).min(16);
    Duration::from_millis(policy.base_backoff_ms.saturating_mul(factor))
}

/// Drives a chat transport with the model's retry, backoff, and throttle
/// policy; failures after the retry budget end up in the record's `error`.
pub struct RemoteConnector {
    model_name: String,
    params: GenerationParams,
    include_top_k: bool,
    policy: TransportPolicy,
    limiter: Option<RateLimiter>,
    transport: Box<dyn ChatTransport>,
}

impl RemoteConnector {
    pub fn new(spec: &ModelSpec, transport: Box<dyn ChatTransport>) -> Self {
        if !spec.supports_top_k {
            tracing::info!(
                model = spec.id,
                "endpoint does not accept top_k, dropping it from requests"
            );
        }
        Self {
            model_name: spec.model_name.clone(),
            params: spec.params.clone(),
            include_top_k: spec.supports_top_k,
            policy: spec.transport.clone(),
            limiter: spec.transport.requests_per_second.map(RateLimiter::new),
            transport,
        }
    }
}

impl Connector for RemoteConnector {
    fn generate<'a>(
        &'a self,
        task: &'a RunTask,
        prompt: &'a PromptPair,
    ) -> BoxFuture<'a, RawResponse> {
        async move {
            let request = ChatRequest {
                model_name: self.model_name.clone(),
                system: prompt.system.clone(),
                user: prompt.user.clone(),
                params: self.params.clone(),
                seed: task.seed,
                include_top_k: self.include_top_k,
            };
            let started = tokio::time::Instant::now();
            let mut retries = 0u32;
            let outcome = loop {
                if let Some(limiter) = &self.limiter {
                    limiter.acquire().await;
                }
                match self.transport.chat(&request).await {
                    Ok(reply) => break Ok(reply),
                    Err(TransportError::Retryable { message })
                        if retries < self.policy.max_retries =>
                    {
                        retries += 1;
                        let delay = backoff_delay(&self.policy, retries);
                        tracing::warn!(
                            model = self.model_name,
                            question = task.question_id,
                            attempt = retries,
                            delay_ms = delay.as_millis() as u64,
                            error = message,
                            "retrying request"
                        );
                        tokio::time::sleep(delay).await;
                    }
                    Err(e) => break Err(e),
                }
            };
            let latency_ms = started.elapsed().as_millis() as u64;
            match outcome {
                Ok(reply) => RawResponse {
                    task: task.clone(),
                    text: reply.text,
                    latency_ms,
                    retry_count: retries,
                    endpoint_meta: reply.meta,
                    error: None,
                },
                Err(e) => RawResponse {
                    task: task.clone(),
                    text: String::new(),
                    latency_ms,
                    retry_count: retries,
                    endpoint_meta: None,
                    error: Some(e.to_string()),
                },
            }
        }
        .boxed()
    }
}

fn classify_status(status: reqwest::StatusCode, body: &str) -> TransportError {
    let snippet: String = body.chars().take(200).collect();
    let message = format!("{status}: {snippet}");
    if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
        TransportError::Retryable { message }
    } else {
        TransportError::Fatal { message }
    }
}

fn classify_send_error(e: reqwest::Error) -> TransportError {
    // Timeouts and connection drops are transient; anything else about the
    // request itself is not going to improve.
    if e.is_timeout() || e.is_connect() || e.is_request() && e.status().is_none() {
        TransportError::Retryable { message: e.to_string() }
    } else {
        TransportError::Fatal { message: e.to_string() }
    }
}

/// OpenAI-style `POST {endpoint}/chat/completions`.
pub struct HttpChatTransport {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpChatTransport {
    pub fn new(endpoint: String, api_key: Option<String>, timeout_ms: u64) -> Result<Self, String> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client, endpoint, api_key })
    }
}

impl ChatTransport for HttpChatTransport {
    fn chat<'a>(
        &'a self,
        request: &'a ChatRequest,
    ) -> BoxFuture<'a, Result<ChatReply, TransportError>> {
        async move {
            let url = format!("{}/chat/completions", self.endpoint.trim_end_matches('/'));
            let mut body = serde_json::json!({
                "model": request.model_name,
                "messages": [
                    {"role": "system", "content": request.system},
                    {"role": "user", "content": request.user},
                ],
                "max_tokens": request.params.max_new_tokens,
                "temperature": request.params.temperature,
                "top_p": request.params.top_p,
                "seed": request.seed,
            });
            if request.include_top_k {
                body["top_k"] = request.params.top_k.into();
            }
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().await.map_err(classify_send_error)?;
            let status = resp.status();
            let text = resp.text().await.map_err(classify_send_error)?;
            if !status.is_success() {
                return Err(classify_status(status, &text));
            }
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
                TransportError::Fatal { message: format!("unparsable reply: {e}") }
            })?;
            let content = value
                .pointer("/choices/0/message/content")
                .and_then(|v| v.as_str())
                .ok_or_else(|| TransportError::Fatal {
                    message: "reply has no choices[0].message.content".to_owned(),
                })?;
            let mut meta = serde_json::Map::new();
            for key in ["model", "usage"] {
                if let Some(v) = value.get(key) {
                    meta.insert(key.to_owned(), v.clone());
                }
            }
            Ok(ChatReply {
                text: content.to_owned(),
                meta: if meta.is_empty() { None } else { Some(meta.into()) },
            })
        }
        .boxed()
    }
}

pub trait ProbabilityProvider: Send + Sync {
    fn probabilities<'a>(
        &'a self,
        response_text: &'a str,
        option_display_texts: &'a [String],
    ) -> BoxFuture<'a, Result<Vec<f64>, TransportError>>;
}

/// Client for the fine-tuned judge. One POST per response:
/// `{"response_text", "option_display_texts"}` in,
/// `{"probabilities": [...]}` out, one probability per option in order.
pub struct HttpProbabilityProvider {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    policy: TransportPolicy,
    limiter: Option<RateLimiter>,
}

impl HttpProbabilityProvider {
    pub fn new(provider: &ProviderRef) -> Result<Self, String> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(provider.transport.timeout_ms))
            .build()
            .map_err(|e| e.to_string())?;
        let api_key = provider.auth_env.as_deref().and_then(|var| std::env::var(var).ok());
        Ok(Self {
            client,
            endpoint: provider.endpoint.clone(),
            api_key,
            policy: provider.transport.clone(),
            limiter: provider.transport.requests_per_second.map(RateLimiter::new),
        })
    }

    async fn call_once(
        &self,
        response_text: &str,
        option_display_texts: &[String],
    ) -> Result<Vec<f64>, TransportError> {
        let body = serde_json::json!({
            "response_text": response_text,
            "option_display_texts": option_display_texts,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(classify_send_error)?;
        let status = resp.status();
        let text = resp.text().await.map_err(classify_send_error)?;
        if !status.is_success() {
            return Err(classify_status(status, &text));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| TransportError::Fatal { message: format!("unparsable reply: {e}") })?;
        value
            .get("probabilities")
            .and_then(|v| v.as_array())
            .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
            .ok_or_else(|| TransportError::Fatal {
                message: "reply has no probabilities array".to_owned(),
            })
    }
}

impl ProbabilityProvider for HttpProbabilityProvider {
    fn probabilities<'a>(
        &'a self,
        response_text: &'a str,
        option_display_texts: &'a [String],
    ) -> BoxFuture<'a, Result<Vec<f64>, TransportError>> {
        async move {
            let mut retries = 0u32;
            loop {
                if let Some(limiter) = &self.limiter {
                    limiter.acquire().await;
                }
                match self.call_once(response_text, option_display_texts).await {
                    Ok(probs) => return Ok(probs),
                    Err(TransportError::Retryable { message })
                        if retries < self.policy.max_retries =>
                    {
                        retries += 1;
                        tracing::warn!(attempt = retries, error = message, "retrying judge call");
                        tokio::time::sleep(backoff_delay(&self.policy, retries)).await;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        .boxed()
    }
}
