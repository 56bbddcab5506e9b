use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::protocol::{ErrorCode, ErrorResponse, InvokeRequest, InvokeResponse, PALETTE_SUFFIX};
use crate::model::{Palette, MIME_JSON};
use crate::tools::{OutputFile, ToolOutput};

/// Response bodies above this size are rejected.
pub const MAX_RESPONSE_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("could not reach tool server: {0}")]
    Transport(String),
    #[error("tool server error (HTTP {status}): {message}")]
    Server { status: u16, message: String },
    #[error("{message}")]
    Rejected {
        code: ErrorCode,
        message: String,
        supported: Option<Vec<String>>,
    },
    #[error("malformed tool response: {0}")]
    Malformed(String),
    #[error("tool response larger than {MAX_RESPONSE_BYTES} bytes")]
    TooLarge,
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    http: reqwest::Client,
}

impl Default for RemoteClient {
    fn default() -> Self {
        Self::new()
    }
}

impl RemoteClient {
    pub fn new() -> Self {
        Self {
            http: reqwest::Client::new(),
        }
    }

    pub async fn invoke(
        &self,
        endpoint: &str,
        request: &InvokeRequest,
        timeout: Duration,
    ) -> Result<InvokeResponse, RemoteError> {
        let url = format!("{}/v1/invoke", endpoint.trim_end_matches('/'));
        let resp = self
            .http
            .post(url)
            .timeout(timeout)
            .json(request)
            .send()
            .await
            .map_err(|e| if e.is_timeout() { RemoteError::Timeout(timeout) } else { RemoteError::Transport(e.to_string()) })?;
        let status = resp.status();
        if resp.content_length().is_some_and(|n| n as usize > MAX_RESPONSE_BYTES) {
            return Err(RemoteError::TooLarge);
        }
        let body = resp
            .bytes()
            .await
            .map_err(|e| if e.is_timeout() { RemoteError::Timeout(timeout) } else { RemoteError::Transport(e.to_string()) })?;
        if body.len() > MAX_RESPONSE_BYTES {
            return Err(RemoteError::TooLarge);
        }
        if status.is_client_error() {
            if let Ok(err) = serde_json::from_slice::<ErrorResponse>(&body) {
                return Err(RemoteError::Rejected {
                    code: err.error.code,
                    message: err.error.message,
                    supported: err.error.supported,
                });
            }
        }
        if !status.is_success() {
            return Err(RemoteError::Server {
                status: status.as_u16(),
                message: String::from_utf8_lossy(&body).chars().take(200).collect(),
            });
        }
        serde_json::from_slice(&body).map_err(|e| RemoteError::Malformed(e.to_string()))
    }
}

/// Decodes the returned files, attaching each `<hint>.palette` JSON file to
/// the mask hinted `<hint>`.
pub fn into_tool_output(resp: InvokeResponse) -> Result<ToolOutput, RemoteError> {
    let mut files: Vec<OutputFile> = Vec::new();
    let mut palettes = Vec::new();
    for f in resp.files {
        let bytes = STANDARD
            .decode(&f.b64)
            .map_err(|e| RemoteError::Malformed(format!("file `{}`: {e}", f.name_hint)))?;
        match f.name_hint.strip_suffix(PALETTE_SUFFIX) {
            Some(target) if f.mime == MIME_JSON => {
                let palette: Palette = serde_json::from_slice(&bytes)
                    .map_err(|e| RemoteError::Malformed(format!("palette `{}`: {e}", f.name_hint)))?;
                palettes.push((target.to_string(), palette));
            }
            _ => files.push(OutputFile {
                name_hint: f.name_hint,
                mime: f.mime,
                bytes,
                palette: None,
            }),
        }
    }
    for (target, palette) in palettes {
        let file = files
            .iter_mut()
            .find(|f| f.name_hint == target)
            .ok_or_else(|| RemoteError::Malformed(format!("palette for unknown file `{target}`")))?;
        file.palette = Some(palette);
    }
    Ok(ToolOutput {
        outputs: resp.outputs,
        files,
    })
}
