use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{backoff_delay, check_messages, ChatBackend, ChatMessage, LlmError};

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAiConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            initial_backoff_ms: 500,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl OpenAiConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0) {
            return Err(LlmError::Config("temperature must be >= 0".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(LlmError::Config("timeout must be > 0".into()));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

struct ApiKey(String);

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

/// Request body for a chat-completions call. Depends only on its arguments.
pub fn build_request_body(config: &OpenAiConfig, messages: &[ChatMessage]) -> String {
    serde_json::to_string(&RequestBody {
        model: &config.model,
        messages,
        temperature: config.temperature,
    })
    .expect("request body serializes")
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Client for `POST {base}/v1/chat/completions` with bearer auth.
#[derive(Debug)]
pub struct OpenAiBackend {
    config: OpenAiConfig,
    key: ApiKey,
    http: reqwest::Client,
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

impl OpenAiBackend {
    pub fn new(config: OpenAiConfig, api_key: String) -> Result<Self, LlmError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            config,
            key: ApiKey(api_key),
            http,
        })
    }

    /// Reads the key from the configured environment variable.
    pub fn from_env(config: OpenAiConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| LlmError::Auth(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::new(config, key)
    }

    async fn attempt(&self, body: &str) -> Result<String, Attempt> {
        let resp = self
            .http
            .post(self.config.endpoint())
            .bearer_auth(&self.key.0)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .await
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(Attempt::Fatal(LlmError::Auth(format!("HTTP {status}"))));
        }
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        let text = resp.text().await.map_err(|e| Attempt::Retry(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(LlmError::Rejected(format!("HTTP {status}: {text}"))));
        }
        let parsed: ResponseBody = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(LlmError::Rejected(format!("unexpected response body: {e}"))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Fatal(LlmError::Rejected("response has no choices[0].message.content".into())))
    }
}

#[async_trait]
impl ChatBackend for OpenAiBackend {
    async fn complete(&self, _session_id: &str, messages: &[ChatMessage]) -> Result<String, LlmError> {
        check_messages(messages)?;
        let body = build_request_body(&self.config, messages);
        let initial = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&body).await {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempt >= self.config.max_retries {
                        return Err(LlmError::Transport {
                            attempts: attempt + 1,
                            message,
                        });
                    }
                    tracing::warn!(attempt, %message, "chat completion failed, retrying");
                    tokio::time::sleep(backoff_delay(initial, attempt)).await;
                    attempt += 1;
                }
            }
        }
    }

    fn describe(&self) -> String {
        format!("openai-compatible {} at {}", self.config.model, self.config.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_is_pure() {
        let cfg = OpenAiConfig::default();
        let msgs = [ChatMessage::system("sys"), ChatMessage::user("hi")];
        let a = build_request_body(&cfg, &msgs);
        assert_eq!(a, build_request_body(&cfg, &msgs));
        assert_eq!(
            a,
            r#"{"model":"gpt-3.5-turbo","messages":[{"role":"system","content":"sys"},{"role":"user","content":"hi"}],"temperature":0.0}"#
        );
    }

    #[test]
    fn key_is_redacted() {
        let b = OpenAiBackend::new(OpenAiConfig::default(), "sk-secret".into()).unwrap();
        let dbg = format!("{b:?}");
        assert!(!dbg.contains("sk-secret"));
        assert!(!b.describe().contains("sk-secret"));
    }

    #[test]
    fn config_validation() {
        let bad = OpenAiConfig { temperature: -1.0, ..Default::default() };
        assert!(OpenAiBackend::new(bad, "k".into()).is_err());
        let bad = OpenAiConfig { timeout_secs: 0.0, ..Default::default() };
        assert!(OpenAiBackend::new(bad, "k".into()).is_err());
    }
}
