use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FileRegistry, ModelError};
use crate::planner::{AgentTrace, Outcome};

/// A caption attached to an uploaded image and repeated in every system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualCue {
    pub file: String,
    pub caption: String,
}

/// One finished user turn: the query and what the agent replied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub user: String,
    pub agent: String,
}

/// Conversation state. Only one plan may mutate a session at a time.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    pub files: FileRegistry,
    pub visual_cues: Vec<VisualCue>,
    pub history: Vec<Exchange>,
    pub traces: Vec<AgentTrace>,
    next_step: usize,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            files: FileRegistry::new(id.clone()),
            id,
            visual_cues: Vec::new(),
            history: Vec::new(),
            traces: Vec::new(),
            next_step: 0,
        }
    }

    /// Session whose files are persisted under `{root}/{id}/`.
    pub fn with_store(id: impl Into<String>, root: &Path) -> Result<Self, ModelError> {
        let id = id.into();
        Ok(Self {
            files: FileRegistry::with_store(id.clone(), root)?,
            id,
            visual_cues: Vec::new(),
            history: Vec::new(),
            traces: Vec::new(),
            next_step: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Session-wide step number for the next tool execution; used in
    /// output file names so they never collide across plans.
    pub fn take_step_number(&mut self) -> usize {
        let n = self.next_step;
        self.next_step += 1;
        n
    }

    /// Records a finished plan. Final answers and clarifying questions
    /// become history; aborted plans do not.
    pub fn record(&mut self, query: &str, trace: AgentTrace) {
        match &trace.outcome {
            Outcome::FinalAnswer(text) | Outcome::Clarify(text) => self.history.push(Exchange {
                user: query.to_string(),
                agent: text.clone(),
            }),
            Outcome::Aborted { .. } => {}
        }
        self.traces.push(trace);
    }

    /// File-name-shaped mentions in stored observations and answers that
    /// do not resolve. Empty for every well-behaved session.
    pub fn unresolved_mentions(&self) -> Vec<String> {
        let mut out = Vec::new();
        for trace in &self.traces {
            for step in &trace.steps {
                out.extend(self.files.unresolved_mentions(&step.observation));
            }
            if let Some(text) = trace.outcome.text() {
                out.extend(self.files.unresolved_mentions(text));
            }
        }
        out
    }
}
