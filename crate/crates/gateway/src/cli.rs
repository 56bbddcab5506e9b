//! Helpers behind the command-line subcommands.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use geoagent_core::eval::{load_queries, run_benchmark, score, CreditMode, EvalReport, QueryResult};
use geoagent_core::model::{mime_for_extension, Palette, Provenance, Session};
use geoagent_core::planner::{Planner, StreamEvent};
use geoagent_core::react::{render_input, ActionInput, InputValue};
use geoagent_core::registry::{validate_action, ToolRegistry};
use geoagent_core::tools::{ToolOutput, ToolRunner};
use serde::{Deserialize, Serialize};

/// One line of terminal output for a plan event.
pub fn format_event(e: &StreamEvent) -> String {
    match e {
        StreamEvent::Thought { step, text } => format!("[{step}] Thought: {text}"),
        StreamEvent::Action { step, tool, input } => format!("[{step}] Action: {tool} {}", render_input(input)),
        StreamEvent::Observation { step, text, .. } => {
            let body = text.strip_prefix("Observation:").unwrap_or(text).trim();
            format!("[{step}] Observation: {}", body.replace('\n', "\n    "))
        }
        StreamEvent::Final { text } => format!("Answer: {text}"),
        StreamEvent::Clarify { text } => format!("Question: {text}"),
        StreamEvent::Error { reason, detail } => format!("Error ({reason}): {detail}"),
    }
}

fn mime_of(path: &Path) -> anyhow::Result<&'static str> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(|e| mime_for_extension(&e.to_ascii_lowercase()))
        .ok_or_else(|| anyhow!("{}: unsupported file type (png, jpg or json)", path.display()))
}

/// A file handed to a native tool from disk.
#[derive(Debug, Clone)]
pub struct FileArg {
    pub field: String,
    pub path: PathBuf,
    /// Palette for a mask; defaults to `<path>.palette.json` when present.
    pub palette: Option<PathBuf>,
}

impl FileArg {
    pub fn new(field: &str, path: impl Into<PathBuf>) -> Self {
        Self {
            field: field.into(),
            path: path.into(),
            palette: None,
        }
    }

    pub fn with_palette(mut self, palette: Option<PathBuf>) -> Self {
        self.palette = palette;
        self
    }

    fn palette_path(&self) -> Option<PathBuf> {
        self.palette.clone().or_else(|| {
            let mut sidecar = self.path.clone().into_os_string();
            sidecar.push(".palette.json");
            let sidecar = PathBuf::from(sidecar);
            sidecar.is_file().then_some(sidecar)
        })
    }
}

/// Runs a native tool on files from disk, through the same validation the
/// planner applies.
pub async fn run_native_tool(
    registry: &ToolRegistry,
    tool: &str,
    files: &[FileArg],
    params: ActionInput,
) -> anyhow::Result<ToolOutput> {
    let session = Session::new("cli");
    let mut input = params;
    for f in files {
        let bytes = std::fs::read(&f.path).with_context(|| format!("reading {}", f.path.display()))?;
        let stem = f.path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
        let reg = session.files.register_file(Provenance::Upload, stem, mime_of(&f.path)?, bytes)?;
        if let Some(p) = f.palette_path() {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let palette: Palette = serde_json::from_str(&text).with_context(|| p.display().to_string())?;
            session.files.attach_palette(&reg.name, palette)?;
        }
        input.insert(f.field.clone(), InputValue::Str(reg.name));
    }
    let inv = validate_action(registry, &session, tool, &input).map_err(|e| anyhow!("{e}"))?;
    Ok(ToolRunner::new().run(&inv, &session.files).await?)
}

/// Writes the single file a tool produced to `out`.
pub fn write_single_output(out: &ToolOutput, path: &Path) -> anyhow::Result<()> {
    match out.files.as_slice() {
        [f] => std::fs::write(path, &f.bytes).with_context(|| format!("writing {}", path.display())),
        other => bail!("expected one output file, tool produced {}", other.len()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub results: Vec<QueryResult>,
    pub report: EvalReport,
}

/// Runs a labelled dataset; images are resolved against the dataset's directory.
pub async fn run_eval(planner: &Planner, dataset: &Path, credit: CreditMode) -> anyhow::Result<EvalOutput> {
    let names = planner.registry().names();
    let queries = load_queries(dataset, Some(&names))?;
    let dir = dataset.parent().unwrap_or(Path::new("."));
    let results = run_benchmark(planner, &queries, dir, credit).await;
    let report = score(&results, &names);
    Ok(EvalOutput { results, report })
}
