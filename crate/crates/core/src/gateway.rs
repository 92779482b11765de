//! OpenAI-compatible chat-completion policy.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kernel::{Policy, PolicyError};
use crate::message::{ContextWindow, Message, MessageKind};

pub const OBSERVATION_PREFIX: &str = "Observation: ";
const STATUS_PREFIX: &str = "[Context Status:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            token_env: "MEMEX_API_TOKEN".into(),
            timeout_ms: 60_000,
            max_retries: 3,
            temperature: 0.0,
            backoff_ms: 200,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_ms == 0 {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if self.endpoint.is_empty() {
            return Err(GatewayError::Config("endpoint must be set".into()));
        }
        Ok(())
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint.trim_end_matches('/'))
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway timed out after {attempts} attempts: {last}")]
    GatewayTimeout { attempts: u32, last: String },
    #[error("gateway protocol error: {0}")]
    GatewayProtocolError(String),
    #[error("gateway configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// Map a window to chat turns, preserving order.
pub fn window_to_chat(window: &ContextWindow) -> ChatRequest {
    let messages = window
        .messages()
        .iter()
        .map(|m| {
            let text = m.payload();
            match m.kind() {
                MessageKind::SystemPrompt => ChatMessage::new("system", text),
                MessageKind::ThinkingAndCall => ChatMessage::new("assistant", text),
                MessageKind::ToolOutput | MessageKind::RetrievedBlock => {
                    ChatMessage::new("user", format!("{OBSERVATION_PREFIX}{text}"))
                }
                MessageKind::Task | MessageKind::ContextStatus | MessageKind::IndexedSummary => {
                    ChatMessage::new("user", text)
                }
            }
        })
        .collect();
    ChatRequest {
        model: None,
        messages,
        temperature: None,
    }
}

/// Rebuild a window from chat turns. Retrieved blocks come back as tool
/// outputs, so `window_to_chat ∘ chat_to_window` is the identity on chat
/// requests produced by [`window_to_chat`].
pub fn chat_to_window(messages: &[ChatMessage]) -> Option<ContextWindow> {
    let (system, rest) = messages.split_first()?;
    let (task, rest) = rest.split_first()?;
    if system.role != "system" || task.role != "user" {
        return None;
    }
    let mut out = vec![
        Message::new(MessageKind::SystemPrompt, system.content.clone()),
        Message::new(MessageKind::Task, task.content.clone()),
    ];
    for m in rest {
        let message = match m.role.as_str() {
            "assistant" => Message::new(MessageKind::ThinkingAndCall, m.content.clone()),
            "user" => match m.content.strip_prefix(OBSERVATION_PREFIX) {
                Some(obs) => Message::new(MessageKind::ToolOutput, obs),
                None if m.content.starts_with(STATUS_PREFIX) => Message::new(MessageKind::ContextStatus, m.content.clone()),
                None => Message::new(MessageKind::IndexedSummary, m.content.clone()),
            },
            _ => return None,
        };
        out.push(message);
    }
    ContextWindow::from_messages(out).ok()
}

fn extract_content(body: &str) -> Result<String, GatewayError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::GatewayProtocolError(format!("invalid JSON body: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::GatewayProtocolError("response lacks choices[0].message.content".into()))
}

/// Blocking chat-completion client.
#[derive(Debug, Clone)]
pub struct Gateway {
    config: GatewayConfig,
    client: reqwest::blocking::Client,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Send `request`, retrying transient failures with exponential backoff.
    pub fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut request = request.clone();
        request.model.get_or_insert_with(|| self.config.model.clone());
        request.temperature.get_or_insert(self.config.temperature);
        let token = std::env::var(&self.config.token_env).ok();
        let url = self.config.url();

        let mut last = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let mut builder = self.client.post(&url).json(&request);
            if let Some(token) = &token {
                builder = builder.bearer_auth(token);
            }
            match builder.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.as_u16() == 429 || status.is_server_error() {
                        last = format!("HTTP {status}");
                        tracing::debug!(attempt, %status, "transient gateway failure");
                        continue;
                    }
                    if !status.is_success() {
                        return Err(GatewayError::GatewayProtocolError(format!("HTTP {status}")));
                    }
                    let body = response
                        .text()
                        .map_err(|e| GatewayError::GatewayProtocolError(format!("unreadable body: {e}")))?;
                    return extract_content(&body);
                }
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                    last = e.to_string();
                    tracing::debug!(attempt, error = %e, "gateway request failed");
                }
                Err(e) => return Err(GatewayError::GatewayProtocolError(e.to_string())),
            }
        }
        Err(GatewayError::GatewayTimeout { attempts, last })
    }
}

/// Drives the kernel through a [`Gateway`].
#[derive(Debug, Clone)]
pub struct GatewayPolicy {
    gateway: Gateway,
}

impl GatewayPolicy {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            gateway: Gateway::new(config)?,
        })
    }
}

impl Policy for GatewayPolicy {
    fn act(&mut self, window: &ContextWindow) -> Result<String, PolicyError> {
        self.gateway
            .complete(&window_to_chat(window))
            .map_err(|e| PolicyError::Failed(e.to_string()))
    }
}
