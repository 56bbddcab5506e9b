use serde::{Deserialize, Serialize};

use crate::react::{ActionInput, ObservedFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    ToolError,
    ValidationError,
}

/// One requested action and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// Position within this plan.
    pub index: usize,
    /// Session-wide step number, used in observation text and file names.
    pub step_number: usize,
    pub thought: String,
    pub tool: String,
    pub action_input: ActionInput,
    pub observation: String,
    pub produced_files: Vec<String>,
    pub status: StepStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// The model kept replying outside the grammar.
    Unparseable,
    /// The step budget ran out and the model still did not answer.
    StepLimit,
    BackendError,
    /// The model kept naming files that do not exist in its answer.
    FabricatedFile,
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AbortReason::Unparseable => "unparseable",
            AbortReason::StepLimit => "step_limit",
            AbortReason::BackendError => "backend_error",
            AbortReason::FabricatedFile => "fabricated_file",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Outcome {
    FinalAnswer(String),
    Clarify(String),
    Aborted { reason: AbortReason, detail: String },
}

impl Outcome {
    /// Text shown to the user, if the plan ended with one.
    pub fn text(&self) -> Option<&str> {
        match self {
            Outcome::FinalAnswer(t) | Outcome::Clarify(t) => Some(t),
            Outcome::Aborted { .. } => None,
        }
    }

    pub fn is_final_answer(&self) -> bool {
        matches!(self, Outcome::FinalAnswer(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub query: String,
    pub steps: Vec<PlanStep>,
    pub outcome: Outcome,
    pub llm_calls: usize,
    pub wall_time_ms: u64,
}

impl AgentTrace {
    /// Serialization without timing, for comparing runs.
    pub fn canonical_json(&self) -> String {
        let mut t = self.clone();
        t.wall_time_ms = 0;
        serde_json::to_string(&t).expect("trace serializes")
    }

    /// Tools that ran successfully, in order.
    pub fn executed_tools(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter(|s| s.status == StepStatus::Ok)
            .map(|s| s.tool.as_str())
            .collect()
    }

    /// Tools the model asked for, whether or not they ran.
    pub fn planned_tools(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.tool.as_str()).collect()
    }
}

/// Incremental progress of a plan, as streamed to clients. Every step
/// yields a thought (possibly empty), an action and an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamEvent {
    Thought { step: usize, text: String },
    Action { step: usize, tool: String, input: ActionInput },
    Observation { step: usize, text: String, files: Vec<ObservedFile> },
    Final { text: String },
    Clarify { text: String },
    Error { reason: AbortReason, detail: String },
}

impl StreamEvent {
    pub fn is_terminal(&self) -> bool {
        matches!(self, StreamEvent::Final { .. } | StreamEvent::Clarify { .. } | StreamEvent::Error { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StreamEvent::Thought { .. } => "thought",
            StreamEvent::Action { .. } => "action",
            StreamEvent::Observation { .. } => "observation",
            StreamEvent::Final { .. } => "final",
            StreamEvent::Clarify { .. } => "clarify",
            StreamEvent::Error { .. } => "error",
        }
    }
}

/// The events a finished trace would have streamed.
pub fn events_from_trace(trace: &AgentTrace, files: &[crate::model::FileRef]) -> Vec<StreamEvent> {
    let mut out = Vec::new();
    for s in &trace.steps {
        out.push(StreamEvent::Thought {
            step: s.index,
            text: s.thought.clone(),
        });
        out.push(StreamEvent::Action {
            step: s.index,
            tool: s.tool.clone(),
            input: s.action_input.clone(),
        });
        out.push(StreamEvent::Observation {
            step: s.index,
            text: s.observation.clone(),
            files: s
                .produced_files
                .iter()
                .map(|n| ObservedFile {
                    name: n.clone(),
                    mime: files
                        .iter()
                        .find(|f| &f.name == n)
                        .map(|f| f.mime.clone())
                        .unwrap_or_default(),
                })
                .collect(),
        });
    }
    out.push(match &trace.outcome {
        Outcome::FinalAnswer(t) => StreamEvent::Final { text: t.clone() },
        Outcome::Clarify(t) => StreamEvent::Clarify { text: t.clone() },
        Outcome::Aborted { reason, detail } => StreamEvent::Error {
            reason: *reason,
            detail: detail.clone(),
        },
    });
    out
}
