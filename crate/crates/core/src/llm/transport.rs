//! Chat-completion transports and the retrying request loop.

use std::collections::VecDeque;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::session::{Role, Transcript};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// A failed request. `retryable` marks rate limits, server errors and
/// connection problems.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportFailure {
    pub message: String,
    pub retryable: bool,
}

impl TransportFailure {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportFailure { message: message.into(), retryable: true }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportFailure { message: message.into(), retryable: false }
    }
}

/// Sends a full message history, returns the assistant's reply.
pub trait ChatTransport: Send {
    fn complete(&mut self, messages: &[ChatMessage]) -> std::result::Result<String, TransportFailure>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    /// Wait before the second attempt; doubled for each further attempt.
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_backoff_ms: 1000, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: usize) -> Self {
        RetryPolicy { max_attempts, base_backoff_ms: 0, max_backoff_ms: 0 }
    }

    fn backoff(&self, failed_attempts: usize) -> Duration {
        let factor = 1u64 << (failed_attempts.saturating_sub(1)).min(20);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Endpoint settings. Secrets come from the environment only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    /// Chat-completion URL; `LMABO_ENDPOINT` overrides it when set.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub retry: RetryPolicy,
    /// Process-wide request cap.
    pub requests_per_minute: Option<u32>,
    /// Keep only this many recent exchanges after the opening pair.
    pub history_window: Option<usize>,
    pub timeout_secs: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            api_key_env: "LMABO_API_KEY".into(),
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            history_window: None,
            timeout_secs: 120,
        }
    }
}

impl TransportConfig {
    pub fn resolved_endpoint(&self) -> String {
        std::env::var("LMABO_ENDPOINT").ok().filter(|s| !s.is_empty()).unwrap_or_else(|| self.endpoint.clone())
    }

    /// Fails when the credential variable is unset or empty.
    pub fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env)
            .ok()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Config(format!("environment variable {} is not set", self.api_key_env)))
    }
}

/// Blocking HTTP client for OpenAI-style chat-completion endpoints.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: String,
    requests_per_minute: Option<u32>,
}

impl HttpTransport {
    pub fn from_config(config: &TransportConfig) -> Result<Self> {
        let api_key = config.api_key()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpTransport {
            client,
            endpoint: config.resolved_endpoint(),
            model: config.model.clone(),
            temperature: config.temperature,
            api_key,
            requests_per_minute: config.requests_per_minute,
        })
    }
}

/// Start times of recent requests, shared by every transport in the process.
fn recent_requests() -> &'static Mutex<VecDeque<Instant>> {
    static RECENT: OnceLock<Mutex<VecDeque<Instant>>> = OnceLock::new();
    RECENT.get_or_init(|| Mutex::new(VecDeque::new()))
}

fn wait_for_slot(limit: u32) {
    let window = Duration::from_secs(60);
    loop {
        let wait = {
            let mut q = recent_requests().lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            while q.front().is_some_and(|t| now.duration_since(*t) >= window) {
                q.pop_front();
            }
            if q.len() < limit as usize {
                q.push_back(now);
                return;
            }
            window - now.duration_since(*q.front().expect("non-empty"))
        };
        std::thread::sleep(wait);
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> std::result::Result<String, TransportFailure> {
        if let Some(limit) = self.requests_per_minute.filter(|&l| l > 0) {
            wait_for_slot(limit);
        }
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| TransportFailure::retryable(format!("request failed: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportFailure::retryable(format!("reading response: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportFailure::retryable(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(TransportFailure::fatal(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportFailure::fatal(format!("malformed response: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportFailure::fatal("response has no choices[0].message.content"))
    }
}

/// In-process stand-in for an endpoint.
#[derive(Clone, Debug)]
pub enum MockTransport {
    /// Returns the replies in order, then repeats the last one.
    Scripted { replies: Vec<String>, next: usize },
    /// Replies with the last message's content.
    Echo,
    /// Fails `failures` times, then always answers `reply`.
    Flaky { failures: usize, reply: String, calls: usize },
    /// Every request fails.
    Down,
}

impl MockTransport {
    pub fn scripted<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        MockTransport::Scripted { replies: replies.into_iter().map(Into::into).collect(), next: 0 }
    }

    pub fn flaky(failures: usize, reply: impl Into<String>) -> Self {
        MockTransport::Flaky { failures, reply: reply.into(), calls: 0 }
    }
}

impl ChatTransport for MockTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> std::result::Result<String, TransportFailure> {
        match self {
            MockTransport::Scripted { replies, next } => {
                let r = replies.get(*next).or(replies.last()).cloned().unwrap_or_default();
                *next += 1;
                Ok(r)
            }
            MockTransport::Echo => Ok(messages.last().map(|m| m.content.clone()).unwrap_or_default()),
            MockTransport::Flaky { failures, reply, calls } => {
                *calls += 1;
                if *calls <= *failures {
                    Err(TransportFailure::retryable(format!("simulated outage {calls}")))
                } else {
                    Ok(reply.clone())
                }
            }
            MockTransport::Down => Err(TransportFailure::retryable("endpoint unreachable")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatOutcome {
    pub reply: String,
    pub attempts: usize,
}

/// Appends `message` as a user turn, sends the (windowed) history and
/// appends the reply. On final failure the user turn stays in the transcript
/// together with an empty assistant turn carrying the error, so the
/// transcript always alternates.
pub fn chat_turn(
    transcript: &mut Transcript,
    message: &str,
    transport: &mut dyn ChatTransport,
    retry: &RetryPolicy,
    history_window: Option<usize>,
) -> Result<ChatOutcome> {
    transcript.push(Role::User, message, None);
    let messages = transcript.request_messages(history_window);
    transcript.record_request(&messages);
    let mut last = String::new();
    let attempts = retry.max_attempts.max(1);
    for attempt in 1..=attempts {
        match transport.complete(&messages) {
            Ok(reply) => {
                if attempt > 1 {
                    tracing::info!("chat request succeeded after {attempt} attempts");
                }
                transcript.push(Role::Assistant, &reply, None);
                return Ok(ChatOutcome { reply, attempts: attempt });
            }
            Err(f) => {
                tracing::warn!("chat request attempt {attempt}/{attempts} failed: {}", f.message);
                last = f.message;
                if !f.retryable {
                    break;
                }
                if attempt < attempts {
                    std::thread::sleep(retry.backoff(attempt));
                }
            }
        }
    }
    transcript.push(Role::Assistant, "", Some(last.clone()));
    Err(Error::Transport(last))
}
