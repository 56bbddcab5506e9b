use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

/// File sent inline with a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFile {
    pub name: String,
    pub mime: String,
    pub b64: String,
}

impl WireFile {
    pub fn new(name: &str, mime: &str, bytes: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            mime: mime.to_string(),
            b64: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Vec<u8>, String> {
        STANDARD.decode(&self.b64).map_err(|e| format!("{}: invalid base64: {e}", self.name))
    }
}

/// `POST {endpoint}/v1/invoke` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvokeRequest {
    pub tool: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, WireFile>,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// File returned by a tool. `name_hint` becomes the stem of the registered
/// name. A JSON file hinted `<hint>.palette` is the palette of the mask
/// hinted `<hint>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireOutputFile {
    pub name_hint: String,
    pub mime: String,
    pub b64: String,
}

impl WireOutputFile {
    pub fn new(name_hint: &str, mime: &str, bytes: &[u8]) -> Self {
        Self {
            name_hint: name_hint.to_string(),
            mime: mime.to_string(),
            b64: STANDARD.encode(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InvokeResponse {
    #[serde(default)]
    pub outputs: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub files: Vec<WireOutputFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnsupportedTool,
    UnsupportedCategory,
    BadInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported: Option<Vec<String>>,
}

/// Body of a 4xx reply: `{"error": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

pub const PALETTE_SUFFIX: &str = ".palette";
