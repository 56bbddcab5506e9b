use std::fmt::Write;

use crate::model::Session;
use crate::react::{render_input, ACTION, ACTION_INPUT, CLARIFY, FINAL_ANSWER, OBSERVATION, THOUGHT};

use super::{FieldSpec, ToolRegistry};

/// Caption used when the captioning tool is unavailable.
pub const NO_CAPTION: &str = "(no caption available)";

fn principle(out: &mut String) {
    out.push_str(
        "# System principle\n\
You are an assistant for remote sensing image interpretation. You cannot see images. \
To answer questions about an image you must use the tools listed below to finish the \
task, rather than directly imagining the content from a description. Call one tool at a \
time, read its observation, then decide whether another tool is needed.\n\
\n\
File names are strict: only use file names that appear in the file list at the end of \
this prompt or in an Observation. Copy them exactly (they are case-sensitive). Never \
invent, guess or modify a file name. If a file you need does not exist, say so.\n\
\n\
If the available tools or information cannot answer the request (for example a category \
a tool does not support), do not make up an answer: explain the limitation or ask the \
user for more information.\n\
\n\
# Reply format\n\
Every reply must use exactly one of these forms.\n\
\n\
To call a tool:\n",
    );
    let _ = write!(
        out,
        "{THOUGHT} <your reasoning>\n{ACTION} <tool name>\n{ACTION_INPUT} <JSON object on one line, values are strings or numbers>\n\n\
Then stop and wait. The engine replies with \"{OBSERVATION} ...\". Never write an {OBSERVATION} line yourself.\n\n\
To answer the user:\n{THOUGHT} <your reasoning>\n{FINAL_ANSWER} <answer>\n\n\
To ask the user for missing information:\n{CLARIFY} <question>\n"
    );
}

fn fields(out: &mut String, label: &str, fields: &[FieldSpec]) {
    if fields.is_empty() {
        let _ = writeln!(out, "{label}: none");
        return;
    }
    let _ = writeln!(out, "{label}:");
    for f in fields {
        let optional = if f.required { "" } else { ", optional" };
        let _ = write!(out, "  - {} ({}{optional})", f.name, f.kind.describe());
        if let Some(d) = &f.description {
            let _ = write!(out, ": {d}");
        }
        out.push('\n');
    }
}

/// Renders the full system prompt for `session`: principle and reply
/// format, one block per tool, in-context examples, visual cues and the
/// session's file list. Pure: identical inputs give identical text.
pub fn render_system_prompt(registry: &ToolRegistry, session: &Session) -> String {
    let mut out = String::new();
    principle(&mut out);

    out.push_str("\n# Tools\n");
    for tool in registry.tools() {
        let _ = writeln!(out, "\n## {}", tool.name);
        let _ = writeln!(out, "Function: {}", tool.description.trim());
        if tool.categories.is_empty() {
            out.push_str("Supported categories: any\n");
        } else {
            let _ = writeln!(out, "Supported categories: {}", tool.categories.join(", "));
        }
        fields(&mut out, "Inputs", &tool.input_schema);
        fields(&mut out, "Outputs", &tool.output_schema);
        if tool.dependencies.is_empty() {
            out.push_str("Typically uses outputs of: none\n");
        } else {
            let _ = writeln!(out, "Typically uses outputs of: {}", tool.dependencies.join(", "));
        }
    }

    out.push_str("\n# Examples\n");
    for tool in registry.tools() {
        for ex in &tool.examples {
            let _ = write!(
                out,
                "\nUser: {}\n{ACTION} {}\n{ACTION_INPUT} {}\n{OBSERVATION} {}\n",
                ex.query,
                tool.name,
                render_input(&ex.action_input),
                ex.observation
            );
        }
    }

    out.push_str("\n# Visual cues\n");
    if session.visual_cues.is_empty() {
        out.push_str("No images uploaded.\n");
    } else {
        for cue in &session.visual_cues {
            let _ = writeln!(out, "- {}: {}", cue.file, cue.caption);
        }
    }

    out.push_str("\n# Files\n");
    let names = session.files.names();
    if names.is_empty() {
        out.push_str("No files available.\n");
    } else {
        for n in names {
            let _ = writeln!(out, "- {n}");
        }
    }
    out
}
