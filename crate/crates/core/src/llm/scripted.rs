use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use regex::Regex;
use serde::Deserialize;

use super::{check_messages, ChatBackend, ChatMessage, LlmError, Role};

/// Scripted replies: either by turn index or by the first pattern matching
/// the last user message.
#[derive(Debug, Clone)]
pub enum Script {
    Index(Vec<String>),
    Pattern(Vec<(Regex, String)>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Plain(String),
    Pattern { pattern: String, response: String },
}

impl Script {
    /// Parses a YAML sequence whose entries are all plain strings (index
    /// mode) or all `{pattern, response}` maps (pattern mode).
    pub fn from_yaml(text: &str) -> Result<Self, LlmError> {
        let value: serde_yaml::Value =
            serde_yaml::from_str(text).map_err(|e| LlmError::MalformedScript(e.to_string()))?;
        if value.is_null() {
            return Ok(Script::Index(Vec::new()));
        }
        let entries: Vec<Entry> =
            serde_yaml::from_value(value).map_err(|e| LlmError::MalformedScript(e.to_string()))?;
        let plain = entries.iter().filter(|e| matches!(e, Entry::Plain(_))).count();
        if plain == entries.len() {
            return Ok(Script::Index(
                entries
                    .into_iter()
                    .map(|e| match e {
                        Entry::Plain(s) => s,
                        Entry::Pattern { .. } => unreachable!(),
                    })
                    .collect(),
            ));
        }
        if plain > 0 {
            return Err(LlmError::MalformedScript(
                "index entries and pattern entries cannot be mixed".into(),
            ));
        }
        let mut patterns = Vec::with_capacity(entries.len());
        for e in entries {
            if let Entry::Pattern { pattern, response } = e {
                let re = Regex::new(&pattern)
                    .map_err(|err| LlmError::MalformedScript(format!("pattern `{pattern}`: {err}")))?;
                patterns.push((re, response));
            }
        }
        Ok(Script::Pattern(patterns))
    }
}

/// Deterministic backend; the turn counter is kept per session.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
    turns: Mutex<HashMap<String, usize>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            turns: Mutex::new(HashMap::new()),
        }
    }

    pub fn index<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(Script::Index(responses.into_iter().map(Into::into).collect()))
    }

    pub fn script(&self) -> &Script {
        &self.script
    }
}

pub fn load_script(path: &Path) -> Result<ScriptedBackend, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::MalformedScript(format!("{}: {e}", path.display())))?;
    Ok(ScriptedBackend::new(Script::from_yaml(&text)?))
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, session_id: &str, messages: &[ChatMessage]) -> Result<String, LlmError> {
        check_messages(messages)?;
        let turn = {
            let mut turns = self.turns.lock().unwrap();
            let t = turns.entry(session_id.to_string()).or_default();
            let current = *t;
            *t += 1;
            current
        };
        match &self.script {
            Script::Index(responses) => responses.get(turn).cloned().ok_or_else(|| {
                LlmError::ScriptExhausted(format!("{} scripted turn(s), turn {turn} requested", responses.len()))
            }),
            Script::Pattern(patterns) => {
                let last_user = messages
                    .iter()
                    .rev()
                    .find(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .unwrap_or("");
                patterns
                    .iter()
                    .find(|(re, _)| re.is_match(last_user))
                    .map(|(_, r)| r.clone())
                    .ok_or_else(|| LlmError::ScriptExhausted(format!("no pattern matches turn {turn}")))
            }
        }
    }

    fn describe(&self) -> String {
        match &self.script {
            Script::Index(r) => format!("scripted ({} turns)", r.len()),
            Script::Pattern(p) => format!("scripted ({} patterns)", p.len()),
        }
    }
}
