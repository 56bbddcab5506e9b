//! Chat-completion backends: an OpenAI-compatible HTTP client and a
//! deterministic scripted backend.

mod openai;
mod scripted;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use openai::{build_request_body, OpenAiBackend, OpenAiConfig, DEFAULT_API_KEY_ENV};
pub use scripted::{load_script, Script, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Exactly one system message, first; user and assistant turns non-empty.
pub fn check_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    match messages.first() {
        Some(m) if m.role == Role::System => {}
        _ => return Err(LlmError::InvalidRequest("first message must be the system prompt".into())),
    }
    for (i, m) in messages.iter().enumerate().skip(1) {
        if m.role == Role::System {
            return Err(LlmError::InvalidRequest(format!("extra system message at position {i}")));
        }
        if m.content.trim().is_empty() {
            return Err(LlmError::InvalidRequest(format!("message {i} is empty")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend rejected the request: {0}")]
    Rejected(String),
    #[error("script exhausted: {0}")]
    ScriptExhausted(String),
    #[error("malformed script: {0}")]
    MalformedScript(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A chat model. `session_id` scopes per-conversation state such as the
/// scripted backend's turn counter.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, session_id: &str, messages: &[ChatMessage]) -> Result<String, LlmError>;

    fn describe(&self) -> String;
}

/// Backend selection, as written on the command line or in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    OpenaiCompatible(OpenAiConfig),
    Scripted { script: PathBuf },
}

impl BackendConfig {
    /// Parses `openai:<model>` or `mock:<script path>`.
    pub fn parse(spec: &str) -> Result<Self, LlmError> {
        match spec.split_once(':') {
            Some(("openai", model)) if !model.is_empty() => Ok(BackendConfig::OpenaiCompatible(OpenAiConfig {
                model: model.to_string(),
                ..OpenAiConfig::default()
            })),
            Some(("mock", path)) if !path.is_empty() => Ok(BackendConfig::Scripted { script: path.into() }),
            _ => Err(LlmError::Config(format!(
                "`{spec}`: expected `openai:<model>` or `mock:<script.yaml>`"
            ))),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, LlmError> {
        match self {
            BackendConfig::OpenaiCompatible(cfg) => Ok(Arc::new(OpenAiBackend::from_env(cfg.clone())?)),
            BackendConfig::Scripted { script } => Ok(Arc::new(load_script(script)?)),
        }
    }
}

pub(crate) fn backoff_delay(initial: Duration, attempt: u32) -> Duration {
    initial.saturating_mul(1u32 << attempt.min(16))
}
