//! Line-oriented text protocol between the language model and the engine.
//!
//! ```text
//! Thought: <free text, optional>
//! Action: <tool name>
//! Action Input: {"image": "u000_input.png", "category": "airplane"}
//! ```
//!
//! or `Final Answer: <text to end>` or `Clarify: <question to end>`. The first
//! marker line decides the variant.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::Number;

pub const THOUGHT: &str = "Thought:";
pub const ACTION: &str = "Action:";
pub const ACTION_INPUT: &str = "Action Input:";
pub const OBSERVATION: &str = "Observation:";
pub const FINAL_ANSWER: &str = "Final Answer:";
pub const CLARIFY: &str = "Clarify:";

/// Scalar value in an action input map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputValue {
    Str(String),
    Num(Number),
}

impl InputValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            InputValue::Str(s) => Some(s),
            InputValue::Num(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            InputValue::Num(n) => n.as_f64(),
            InputValue::Str(s) => s.trim().parse().ok(),
        }
    }
}

impl fmt::Display for InputValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputValue::Str(s) => f.write_str(s),
            InputValue::Num(n) => write!(f, "{n}"),
        }
    }
}

impl From<&str> for InputValue {
    fn from(s: &str) -> Self {
        InputValue::Str(s.to_string())
    }
}

impl From<f64> for InputValue {
    fn from(v: f64) -> Self {
        Number::from_f64(v).map(InputValue::Num).unwrap_or(InputValue::Str(v.to_string()))
    }
}

impl From<i64> for InputValue {
    fn from(v: i64) -> Self {
        InputValue::Num(v.into())
    }
}

pub type ActionInput = BTreeMap<String, InputValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentDecision {
    Action {
        thought: String,
        tool: String,
        input: ActionInput,
    },
    FinalAnswer {
        thought: String,
        answer: String,
    },
    Clarify {
        question: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailureReason {
    NoMarker,
    BadInputPayload,
    MultipleActions,
    TrailingGarbage,
}

impl fmt::Display for ParseFailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseFailureReason::NoMarker => "no_marker",
            ParseFailureReason::BadInputPayload => "bad_input_payload",
            ParseFailureReason::MultipleActions => "multiple_actions",
            ParseFailureReason::TrailingGarbage => "trailing_garbage",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub reason: ParseFailureReason,
    /// Byte range of the offending text in the parsed input.
    pub span: Range<usize>,
    pub message: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reason, self.message)
    }
}

struct Line<'a> {
    start: usize,
    text: &'a str,
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in text.split_inclusive('\n') {
        let body = piece.strip_suffix('\n').unwrap_or(piece);
        let body = body.strip_suffix('\r').unwrap_or(body);
        out.push(Line { start, text: body });
        start += piece.len();
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Marker {
    Action,
    FinalAnswer,
    Clarify,
}

fn marker_of(line: &str) -> Option<(Marker, &str)> {
    let t = line.trim_start();
    if let Some(rest) = t.strip_prefix(ACTION) {
        Some((Marker::Action, rest))
    } else if let Some(rest) = t.strip_prefix(FINAL_ANSWER) {
        Some((Marker::FinalAnswer, rest))
    } else if let Some(rest) = t.strip_prefix(CLARIFY) {
        Some((Marker::Clarify, rest))
    } else {
        None
    }
}

fn failure(reason: ParseFailureReason, span: Range<usize>, message: impl Into<String>) -> ParseFailure {
    ParseFailure {
        reason,
        span,
        message: message.into(),
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_input(payload: &str) -> Result<ActionInput, String> {
    let value: serde_json::Value = serde_json::from_str(payload).map_err(|e| e.to_string())?;
    let serde_json::Value::Object(map) = value else {
        return Err("Action Input must be a JSON object".into());
    };
    let mut out = ActionInput::new();
    for (k, v) in map {
        let v = match v {
            serde_json::Value::String(s) => InputValue::Str(s),
            serde_json::Value::Number(n) => InputValue::Num(n),
            other => return Err(format!("value of `{k}` must be a string or number, got {other}")),
        };
        out.insert(k, v);
    }
    Ok(out)
}

/// Parses one model reply. Total: every input yields a decision or a
/// [`ParseFailure`].
pub fn parse_decision(text: &str) -> Result<AgentDecision, ParseFailure> {
    let all = lines(text);
    let Some(mi) = all.iter().position(|l| marker_of(l.text).is_some()) else {
        return Err(failure(
            ParseFailureReason::NoMarker,
            0..text.len(),
            "reply contains no `Action:`, `Final Answer:` or `Clarify:` line",
        ));
    };
    let marker_line = &all[mi];
    let (marker, rest) = marker_of(marker_line.text).expect("checked above");
    let marker_span = marker_line.start..marker_line.start + marker_line.text.len();

    let head = &text[..marker_line.start];
    let head = head.trim();
    let thought = head.strip_prefix(THOUGHT).unwrap_or(head).trim().to_string();

    match marker {
        Marker::FinalAnswer | Marker::Clarify => {
            let body_start = marker_line.start + (marker_line.text.len() - rest.len());
            let body = text[body_start..].trim().to_string();
            if body.is_empty() {
                return Err(failure(ParseFailureReason::NoMarker, marker_span, "marker is followed by no text"));
            }
            Ok(match marker {
                Marker::FinalAnswer => AgentDecision::FinalAnswer { thought, answer: body },
                _ => AgentDecision::Clarify { question: body },
            })
        }
        Marker::Action => {
            let tool = rest.trim();
            if tool.is_empty() {
                return Err(failure(ParseFailureReason::NoMarker, marker_span, "`Action:` names no tool"));
            }
            if let Some(extra) = all[mi + 1..]
                .iter()
                .find(|l| matches!(marker_of(l.text), Some((Marker::Action, _))))
            {
                return Err(failure(
                    ParseFailureReason::MultipleActions,
                    extra.start..extra.start + extra.text.len(),
                    "only one `Action:` is allowed per reply",
                ));
            }
            if !is_identifier(tool) {
                return Err(failure(
                    ParseFailureReason::BadInputPayload,
                    marker_span,
                    format!("`{tool}` is not a tool identifier"),
                ));
            }
            let Some(input_line) = all.get(mi + 1) else {
                return Err(failure(
                    ParseFailureReason::BadInputPayload,
                    text.len()..text.len(),
                    "`Action:` must be followed by an `Action Input:` line",
                ));
            };
            let input_span = input_line.start..input_line.start + input_line.text.len();
            let Some(payload) = input_line.text.trim_start().strip_prefix(ACTION_INPUT) else {
                return Err(failure(
                    ParseFailureReason::BadInputPayload,
                    input_span,
                    "`Action:` must be followed by an `Action Input:` line",
                ));
            };
            let input = parse_input(payload.trim())
                .map_err(|m| failure(ParseFailureReason::BadInputPayload, input_span.clone(), m))?;
            if let Some(garbage) = all[mi + 2..].iter().find(|l| !l.text.trim().is_empty()) {
                return Err(failure(
                    ParseFailureReason::TrailingGarbage,
                    garbage.start..text.len(),
                    "nothing may follow `Action Input:`; wait for the Observation",
                ));
            }
            Ok(AgentDecision::Action {
                thought,
                tool: tool.to_string(),
                input,
            })
        }
    }
}

pub fn render_input(input: &ActionInput) -> String {
    serde_json::to_string(input).expect("flat map serializes")
}

/// Canonical text for a decision; [`parse_decision`] inverts it.
pub fn render_decision(decision: &AgentDecision) -> String {
    let thought_line = |t: &str| {
        if t.is_empty() {
            String::new()
        } else {
            format!("{THOUGHT} {t}\n")
        }
    };
    match decision {
        AgentDecision::Action { thought, tool, input } => format!(
            "{}{ACTION} {tool}\n{ACTION_INPUT} {}",
            thought_line(thought),
            render_input(input)
        ),
        AgentDecision::FinalAnswer { thought, answer } => {
            format!("{}{FINAL_ANSWER} {answer}", thought_line(thought))
        }
        AgentDecision::Clarify { question } => format!("{CLARIFY} {question}"),
    }
}

/// One file produced by a tool step, as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedFile {
    pub name: String,
    pub mime: String,
}

fn histogram_line(dets: &[serde_json::Value]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in dets {
        if let Some(c) = d.get("category").and_then(|c| c.as_str()) {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn summarize_value(key: &str, value: &serde_json::Value) -> String {
    match (key, value) {
        ("detections", serde_json::Value::Array(dets)) => {
            let noun = if dets.len() == 1 { "object" } else { "objects" };
            if dets.is_empty() {
                "0 objects detected".to_string()
            } else {
                format!("{} {noun} detected ({})", dets.len(), histogram_line(dets))
            }
        }
        ("caption", serde_json::Value::String(s)) => format!("caption: \"{s}\""),
        (_, serde_json::Value::String(s)) => format!("{key} = {s}"),
        (_, serde_json::Value::Object(map)) => {
            let inner = map
                .iter()
                .map(|(k, v)| match v {
                    serde_json::Value::String(s) => format!("{k}: {s}"),
                    other => format!("{k}: {other}"),
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!("{key} = {{{inner}}}")
        }
        _ => format!("{key} = {value}"),
    }
}

/// `Observation:` block for a finished tool step.
pub fn render_observation(
    step_index: usize,
    tool: &str,
    outputs: &serde_json::Map<String, serde_json::Value>,
    files: &[ObservedFile],
) -> String {
    if outputs.is_empty() && files.is_empty() {
        return format!("{OBSERVATION} {tool} produced no findings.");
    }
    let mut text = format!("{OBSERVATION} [step {step_index}] {tool} finished.");
    for (k, v) in outputs {
        text.push_str("\n- ");
        text.push_str(&summarize_value(k, v));
    }
    if !files.is_empty() {
        text.push_str("\nFiles: ");
        text.push_str(
            &files
                .iter()
                .map(|f| format!("{} ({})", f.name, f.mime))
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    text
}

/// Observation for an action that never ran.
pub fn render_rejection(step_index: usize, tool: &str, message: &str) -> String {
    format!("{OBSERVATION} [step {step_index}] {tool} was not run: {message}")
}

/// Observation for a tool that ran and failed.
pub fn render_tool_failure(step_index: usize, tool: &str, message: &str) -> String {
    format!("{OBSERVATION} [step {step_index}] {tool} failed: {message}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_action() {
        let text = "Thought: find planes\nAction: object_detection\nAction Input: {\"image\": \"u000_input.png\", \"category\": \"airplane\"}";
        let d = parse_decision(text).unwrap();
        let mut input = ActionInput::new();
        input.insert("image".into(), "u000_input.png".into());
        input.insert("category".into(), "airplane".into());
        assert_eq!(
            d,
            AgentDecision::Action {
                thought: "find planes".into(),
                tool: "object_detection".into(),
                input,
            }
        );
    }

    #[test]
    fn parses_final_answer() {
        let d = parse_decision("Final Answer: There are 2 airplanes on the runway.").unwrap();
        assert_eq!(
            d,
            AgentDecision::FinalAnswer {
                thought: String::new(),
                answer: "There are 2 airplanes on the runway.".into()
            }
        );
    }

    #[test]
    fn parses_clarify() {
        let d = parse_decision("Thought: unclear\nClarify: Which image do you mean?").unwrap();
        assert_eq!(d, AgentDecision::Clarify { question: "Which image do you mean?".into() });
    }

    #[test]
    fn no_marker() {
        let e = parse_decision("I think the image shows a port.").unwrap_err();
        assert_eq!(e.reason, ParseFailureReason::NoMarker);
        assert_eq!(parse_decision("").unwrap_err().reason, ParseFailureReason::NoMarker);
    }

    #[test]
    fn first_marker_wins() {
        let d = parse_decision("Final Answer: done\nAction: x\nAction Input: {}").unwrap();
        assert!(matches!(d, AgentDecision::FinalAnswer { answer, .. } if answer == "done\nAction: x\nAction Input: {}"));
    }

    #[test]
    fn multiple_actions() {
        let e = parse_decision("Action: a\nAction Input: {}\nAction: b\nAction Input: {}").unwrap_err();
        assert_eq!(e.reason, ParseFailureReason::MultipleActions);
    }

    #[test]
    fn bad_payloads() {
        for text in [
            "Action: a\nAction Input: not json",
            "Action: a\nAction Input: {\"k\": {\"nested\": 1}}",
            "Action: a\nAction Input: [1, 2]",
            "Action: a",
            "Action: a\nsomething else",
            "Action: not a tool\nAction Input: {}",
        ] {
            assert_eq!(parse_decision(text).unwrap_err().reason, ParseFailureReason::BadInputPayload, "{text}");
        }
    }

    #[test]
    fn trailing_garbage() {
        let text = "Action: a\nAction Input: {}\nObservation: made up";
        let e = parse_decision(text).unwrap_err();
        assert_eq!(e.reason, ParseFailureReason::TrailingGarbage);
        assert_eq!(&text[e.span.clone()], "Observation: made up");
        // trailing blank lines are fine
        assert!(parse_decision("Action: a\nAction Input: {}\n\n  \n").is_ok());
    }

    #[test]
    fn render_examples() {
        let d = AgentDecision::FinalAnswer { thought: String::new(), answer: "ok".into() };
        assert_eq!(render_decision(&d), "Final Answer: ok");
        let mut input = ActionInput::new();
        input.insert("a".into(), "1".into());
        let d = AgentDecision::Action { thought: String::new(), tool: "t".into(), input };
        let text = render_decision(&d);
        assert_eq!(text.matches("Action Input:").count(), 1);
        assert_eq!(parse_decision(&text).unwrap(), d);
    }

    #[test]
    fn numbers_keep_their_form() {
        let text = "Action: canny\nAction Input: {\"low\":0.1,\"sigma\":2}";
        let d = parse_decision(text).unwrap();
        assert_eq!(render_decision(&d), text);
    }

    #[test]
    fn observation_templates() {
        let mut outputs = serde_json::Map::new();
        outputs.insert(
            "detections".into(),
            serde_json::json!([
                {"category": "airplane", "bbox": [0,0,1,1], "score": 0.9},
                {"category": "airplane", "bbox": [0,0,1,1], "score": 0.9},
                {"category": "ship", "bbox": [0,0,1,1], "score": 0.9}
            ]),
        );
        let files = vec![ObservedFile {
            name: "s000_det_object_detection.json".into(),
            mime: "application/json".into(),
        }];
        let text = render_observation(0, "object_detection", &outputs, &files);
        assert!(text.starts_with("Observation:"));
        assert!(text.contains("3 objects"), "{text}");
        assert!(text.contains("s000_det_object_detection.json"));

        let mut outputs = serde_json::Map::new();
        outputs.insert("count".into(), 2.into());
        assert!(render_observation(2, "object_counting", &outputs, &[]).contains("count = 2"));

        assert_eq!(
            render_observation(1, "scene_classification", &serde_json::Map::new(), &[]),
            "Observation: scene_classification produced no findings."
        );
    }
}
