//! The ReAct loop: ask the model for a decision, validate and run the
//! requested tool, feed the observation back, until the model answers.

mod trace;

use std::sync::Arc;
use std::time::Instant;

use crate::llm::{ChatBackend, ChatMessage};
use crate::model::{FileRef, ModelError, Provenance, Raster, Session, VisualCue};
use crate::react::{
    self, render_decision, render_observation, render_rejection, render_tool_failure, AgentDecision,
    ObservedFile, ParseFailure, FINAL_ANSWER,
};
use crate::registry::{render_system_prompt, validate_action, ToolRegistry, NO_CAPTION};
use crate::remote::RemoteError;
use crate::tools::{ToolError, ToolOutput, ToolRunner};

pub use trace::{events_from_trace, AbortReason, AgentTrace, Outcome, PlanStep, StepStatus, StreamEvent};

pub const CAPTION_TOOL: &str = "image_captioning";

const FORCE_FINAL: &str =
    "The step budget is used up. You must now give a Final Answer using only the observations above.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannerLimits {
    pub max_steps: usize,
    /// Extra model calls allowed per decision after an unusable reply.
    pub max_parse_retries: usize,
}

impl Default for PlannerLimits {
    fn default() -> Self {
        Self {
            max_steps: 10,
            max_parse_retries: 2,
        }
    }
}

impl PlannerLimits {
    /// Upper bound on model calls for one plan.
    pub fn max_llm_calls(&self) -> usize {
        (self.max_steps + 1) * (1 + self.max_parse_retries)
    }
}

/// Receives plan progress as it happens.
pub trait EventSink: Send + Sync {
    fn emit(&self, event: StreamEvent);
}

impl<F: Fn(StreamEvent) + Send + Sync> EventSink for F {
    fn emit(&self, event: StreamEvent) {
        self(event)
    }
}

/// Discards events.
pub struct NoEvents;

impl EventSink for NoEvents {
    fn emit(&self, _event: StreamEvent) {}
}

#[derive(Clone)]
pub struct Planner {
    registry: Arc<ToolRegistry>,
    backend: Arc<dyn ChatBackend>,
    runner: Arc<ToolRunner>,
    limits: PlannerLimits,
}

enum Decided {
    Decision(AgentDecision),
    Abort(AbortReason, String),
}

fn corrective(failure: &ParseFailure) -> String {
    format!(
        "Your reply could not be parsed ({failure}). Reply again using exactly one of the forms \
         described in the reply format: Thought/Action/Action Input, Thought/Final Answer, or Clarify."
    )
}

fn fabricated(names: &[String]) -> String {
    format!(
        "Your reply mentions {} which do not exist in this session. Only mention file names listed \
         in the prompt or in an Observation. Reply again.",
        names.join(", ")
    )
}

fn describe_tool_error(e: &ToolError) -> String {
    match e {
        ToolError::Remote(RemoteError::Rejected {
            message,
            supported: Some(s),
            ..
        }) => format!("{message}; supported: {}", s.join(", ")),
        other => other.to_string(),
    }
}

impl Planner {
    pub fn new(registry: Arc<ToolRegistry>, backend: Arc<dyn ChatBackend>, runner: Arc<ToolRunner>) -> Self {
        Self {
            registry,
            backend,
            runner,
            limits: PlannerLimits::default(),
        }
    }

    pub fn with_limits(mut self, limits: PlannerLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    pub fn limits(&self) -> PlannerLimits {
        self.limits
    }

    fn base_messages(&self, session: &Session, query: &str) -> Vec<ChatMessage> {
        let mut msgs = vec![ChatMessage::system(render_system_prompt(&self.registry, session))];
        for ex in &session.history {
            msgs.push(ChatMessage::user(ex.user.clone()));
            msgs.push(ChatMessage::assistant(format!("{FINAL_ANSWER} {}", ex.agent)));
        }
        msgs.push(ChatMessage::user(query.to_string()));
        msgs
    }

    /// Asks for one decision, retrying on unparseable replies and on
    /// answers that name files the session does not have.
    async fn decide(&self, session: &Session, messages: &mut Vec<ChatMessage>, llm_calls: &mut usize) -> Decided {
        let mut retries = 0;
        loop {
            messages[0] = ChatMessage::system(render_system_prompt(&self.registry, session));
            *llm_calls += 1;
            let raw = match self.backend.complete(session.id(), messages).await {
                Ok(r) => r,
                Err(e) => return Decided::Abort(AbortReason::BackendError, e.to_string()),
            };
            let (reason, correction) = match react::parse_decision(&raw) {
                Ok(decision) => {
                    let text = match &decision {
                        AgentDecision::FinalAnswer { answer, .. } => Some(answer.as_str()),
                        AgentDecision::Clarify { question } => Some(question.as_str()),
                        AgentDecision::Action { .. } => None,
                    };
                    let unknown = text.map(|t| session.files.unresolved_mentions(t)).unwrap_or_default();
                    if unknown.is_empty() {
                        return Decided::Decision(decision);
                    }
                    (AbortReason::FabricatedFile, fabricated(&unknown))
                }
                Err(failure) => (AbortReason::Unparseable, corrective(&failure)),
            };
            tracing::debug!(%reason, "unusable model reply");
            if retries >= self.limits.max_parse_retries {
                return Decided::Abort(reason, correction);
            }
            retries += 1;
            let shown = if raw.trim().is_empty() { "(empty reply)".to_string() } else { raw };
            messages.push(ChatMessage::assistant(shown));
            messages.push(ChatMessage::user(correction));
        }
    }

    /// Runs one user query to completion and records it in the session.
    pub async fn run_plan(&self, session: &mut Session, query: &str, sink: &dyn EventSink) -> AgentTrace {
        let started = Instant::now();
        let mut messages = self.base_messages(session, query);
        let mut steps: Vec<PlanStep> = Vec::new();
        let mut llm_calls = 0;

        let outcome = loop {
            let forced = steps.len() >= self.limits.max_steps;
            if forced {
                messages.push(ChatMessage::user(FORCE_FINAL));
            }
            let decision = match self.decide(session, &mut messages, &mut llm_calls).await {
                Decided::Decision(d) => d,
                Decided::Abort(AbortReason::Unparseable, _) if forced => {
                    break Outcome::Aborted {
                        reason: AbortReason::StepLimit,
                        detail: format!("no answer after {} steps", self.limits.max_steps),
                    }
                }
                Decided::Abort(reason, detail) => break Outcome::Aborted { reason, detail },
            };
            match decision {
                AgentDecision::FinalAnswer { answer, .. } => break Outcome::FinalAnswer(answer),
                AgentDecision::Clarify { question } => break Outcome::Clarify(question),
                AgentDecision::Action { .. } if forced => {
                    break Outcome::Aborted {
                        reason: AbortReason::StepLimit,
                        detail: format!("no answer after {} steps", self.limits.max_steps),
                    }
                }
                AgentDecision::Action { thought, tool, input } => {
                    let index = steps.len();
                    sink.emit(StreamEvent::Thought { step: index, text: thought.clone() });
                    sink.emit(StreamEvent::Action {
                        step: index,
                        tool: tool.clone(),
                        input: input.clone(),
                    });
                    messages.push(ChatMessage::assistant(render_decision(&AgentDecision::Action {
                        thought: thought.clone(),
                        tool: tool.clone(),
                        input: input.clone(),
                    })));
                    let step_number = session.take_step_number();
                    let (observation, produced, status) = self.execute(session, step_number, &tool, &input).await;
                    sink.emit(StreamEvent::Observation {
                        step: index,
                        text: observation.clone(),
                        files: produced.clone(),
                    });
                    messages.push(ChatMessage::user(observation.clone()));
                    steps.push(PlanStep {
                        index,
                        step_number,
                        thought,
                        tool,
                        action_input: input,
                        observation,
                        produced_files: produced.into_iter().map(|f| f.name).collect(),
                        status,
                    });
                }
            }
        };

        sink.emit(match &outcome {
            Outcome::FinalAnswer(t) => StreamEvent::Final { text: t.clone() },
            Outcome::Clarify(t) => StreamEvent::Clarify { text: t.clone() },
            Outcome::Aborted { reason, detail } => StreamEvent::Error {
                reason: *reason,
                detail: detail.clone(),
            },
        });
        let trace = AgentTrace {
            query: query.to_string(),
            steps,
            outcome,
            llm_calls,
            wall_time_ms: started.elapsed().as_millis() as u64,
        };
        session.record(query, trace.clone());
        trace
    }

    async fn execute(
        &self,
        session: &Session,
        step_number: usize,
        tool: &str,
        input: &react::ActionInput,
    ) -> (String, Vec<ObservedFile>, StepStatus) {
        let inv = match validate_action(&self.registry, session, tool, input) {
            Ok(inv) => inv,
            Err(e) => {
                return (
                    render_rejection(step_number, tool, &e.to_string()),
                    vec![],
                    StepStatus::ValidationError,
                )
            }
        };
        let output = match self.runner.run(&inv, &session.files).await {
            Ok(o) => o,
            Err(e) => {
                return (
                    render_tool_failure(step_number, tool, &describe_tool_error(&e)),
                    vec![],
                    StepStatus::ToolError,
                )
            }
        };
        match register_outputs(session, step_number, tool, output.files) {
            Ok(files) => (
                render_observation(step_number, tool, &output.outputs, &files),
                files,
                StepStatus::Ok,
            ),
            Err(e) => (render_tool_failure(step_number, tool, &e.to_string()), vec![], StepStatus::ToolError),
        }
    }

    /// Registers an uploaded image and captions it once. The caption is
    /// kept as a visual cue; when captioning fails a placeholder is used.
    pub async fn ingest_image(
        &self,
        session: &mut Session,
        original_name: &str,
        mime: &str,
        bytes: Vec<u8>,
    ) -> Result<(FileRef, String), ModelError> {
        Raster::decode(&bytes, mime)?;
        let stem = std::path::Path::new(original_name)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image");
        let file = session.files.register_file(Provenance::Upload, stem, mime, bytes)?;
        let caption = self.caption(session, &file.name).await.unwrap_or_else(|| NO_CAPTION.to_string());
        session.visual_cues.push(VisualCue {
            file: file.name.clone(),
            caption: caption.clone(),
        });
        Ok((file, caption))
    }

    async fn caption(&self, session: &Session, file: &str) -> Option<String> {
        let spec = self.registry.get(CAPTION_TOOL)?;
        let field = spec.input_schema.iter().find(|f| f.kind.is_file())?;
        let input = [(field.name.clone(), file.into())].into_iter().collect();
        let inv = validate_action(&self.registry, session, CAPTION_TOOL, &input).ok()?;
        match self.runner.run(&inv, &session.files).await {
            Ok(ToolOutput { outputs, .. }) => outputs
                .get("caption")
                .and_then(|c| c.as_str())
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(str::to_string),
            Err(e) => {
                tracing::warn!(error = %e, "captioning failed");
                None
            }
        }
    }
}

fn register_outputs(
    session: &Session,
    step_number: usize,
    tool: &str,
    files: Vec<crate::tools::OutputFile>,
) -> Result<Vec<ObservedFile>, ModelError> {
    let mut out = Vec::new();
    for f in files {
        let r = session.files.register_file(
            Provenance::Tool { step: step_number, tool },
            &f.name_hint,
            &f.mime,
            f.bytes,
        )?;
        if let Some(p) = f.palette {
            session.files.attach_palette(&r.name, p)?;
        }
        out.push(ObservedFile {
            name: r.name,
            mime: r.mime,
        });
    }
    Ok(out)
}
