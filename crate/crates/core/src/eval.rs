//! Benchmark harness: run labelled queries through the planner and score
//! whether the essential tool for each query was used.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{mime_for_extension, Session};
use crate::planner::{AbortReason, NoEvents, Outcome, Planner};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub id: String,
    pub query: String,
    pub essential_task: String,
    /// Image uploaded before the query, relative to the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Reads a JSONL dataset. Blank lines are skipped; ids must be unique and,
/// when `known_tasks` is given, every essential task must be in it.
pub fn load_queries(path: &Path, known_tasks: Option<&[&str]>) -> Result<Vec<EvalQuery>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_queries(&text, known_tasks)
}

pub fn parse_queries(text: &str, known_tasks: Option<&[&str]>) -> Result<Vec<EvalQuery>, EvalError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuery = serde_json::from_str(line).map_err(|e| EvalError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        for (field, v) in [("id", &q.id), ("query", &q.query), ("essential_task", &q.essential_task)] {
            if v.trim().is_empty() {
                return Err(EvalError::Line {
                    line: line_no,
                    message: format!("`{field}` is empty"),
                });
            }
        }
        if known_tasks.is_some_and(|k| !k.contains(&q.essential_task.as_str())) {
            return Err(EvalError::Line {
                line: line_no,
                message: format!("unknown essential_task `{}`", q.essential_task),
            });
        }
        if !ids.insert(q.id.clone()) {
            return Err(EvalError::Line {
                line: line_no,
                message: format!("duplicate id `{}`", q.id),
            });
        }
        out.push(q);
    }
    Ok(out)
}

/// Which steps count as having used a tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditMode {
    /// Any requested action, even one that was rejected or failed.
    Planned,
    /// Only actions that ran successfully.
    #[default]
    Executed,
}

impl std::str::FromStr for CreditMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planned" => Ok(CreditMode::Planned),
            "executed" => Ok(CreditMode::Executed),
            other => Err(format!("unknown credit mode `{other}` (planned or executed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub id: String,
    pub essential_task: String,
    pub correct: bool,
    pub tools: Vec<String>,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub llm_calls: usize,
}

impl QueryResult {
    /// A result judged only by the tools it used.
    pub fn judged(id: &str, essential_task: &str, tools: Vec<String>) -> Self {
        Self {
            id: id.into(),
            essential_task: essential_task.into(),
            correct: tools.iter().any(|t| t == essential_task),
            tools,
            outcome: "final_answer".into(),
            detail: None,
            llm_calls: 0,
        }
    }
}

fn failed(q: &EvalQuery, outcome: &str, detail: String) -> QueryResult {
    QueryResult {
        id: q.id.clone(),
        essential_task: q.essential_task.clone(),
        correct: false,
        tools: vec![],
        outcome: outcome.into(),
        detail: Some(detail),
        llm_calls: 0,
    }
}

/// Runs every query in its own fresh session, in order.
pub async fn run_benchmark(
    planner: &Planner,
    queries: &[EvalQuery],
    dataset_dir: &Path,
    credit: CreditMode,
) -> Vec<QueryResult> {
    let mut results = Vec::with_capacity(queries.len());
    for q in queries {
        let mut session = Session::new(format!("eval-{}", q.id));
        if let Some(rel) = &q.image {
            let path = dataset_dir.join(rel);
            let mime = path.extension().and_then(|e| e.to_str()).and_then(mime_for_extension);
            let loaded = match (std::fs::read(&path), mime) {
                (Ok(bytes), Some(mime)) => planner
                    .ingest_image(&mut session, &rel.to_string_lossy(), mime, bytes)
                    .await
                    .map(|_| ())
                    .map_err(|e| e.to_string()),
                (Err(e), _) => Err(e.to_string()),
                (_, None) => Err("unsupported image type".to_string()),
            };
            if let Err(e) = loaded {
                results.push(failed(q, "image_error", format!("{}: {e}", path.display())));
                continue;
            }
        }
        let trace = planner.run_plan(&mut session, &q.query, &NoEvents).await;
        let tools: Vec<String> = match credit {
            CreditMode::Planned => trace.planned_tools(),
            CreditMode::Executed => trace.executed_tools(),
        }
        .into_iter()
        .map(str::to_string)
        .collect();
        let mut r = QueryResult::judged(&q.id, &q.essential_task, tools);
        r.llm_calls = trace.llm_calls;
        match &trace.outcome {
            Outcome::FinalAnswer(_) => {}
            Outcome::Clarify(t) => {
                r.outcome = "clarify".into();
                r.detail = Some(t.clone());
            }
            Outcome::Aborted { reason, detail } => {
                r.outcome = reason.to_string();
                r.detail = Some(detail.clone());
                if *reason == AbortReason::BackendError {
                    r.correct = false;
                }
            }
        }
        results.push(r);
    }
    results
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: String,
    pub n: usize,
    pub correct: usize,
    /// `correct / n`; `None` when no query targets the task.
    pub correctness: Option<f64>,
}

impl TaskScore {
    fn new(task: &str, n: usize, correct: usize) -> Self {
        Self {
            task: task.into(),
            n,
            correct,
            correctness: (n > 0).then(|| correct as f64 / n as f64),
        }
    }

    pub fn percent(&self) -> Option<f64> {
        self.correctness.map(|c| 100.0 * c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<TaskScore>,
    pub overall: TaskScore,
}

/// Per-task and overall correctness. Rows follow `task_order`; tasks seen
/// in the results but absent from it are appended alphabetically.
pub fn score(results: &[QueryResult], task_order: &[&str]) -> EvalReport {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in results {
        let e = tally.entry(r.essential_task.as_str()).or_default();
        e.0 += 1;
        e.1 += r.correct as usize;
    }
    let mut rows: Vec<TaskScore> = task_order
        .iter()
        .map(|t| {
            let (n, c) = tally.get(t).copied().unwrap_or_default();
            TaskScore::new(t, n, c)
        })
        .collect();
    for (t, (n, c)) in &tally {
        if !task_order.contains(t) {
            rows.push(TaskScore::new(t, *n, *c));
        }
    }
    let n = results.len();
    let c = results.iter().filter(|r| r.correct).count();
    EvalReport {
        rows,
        overall: TaskScore::new("Overall", n, c),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}")).unwrap_or_else(|| "n/a".into())
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.task.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>5}  {:>7}  {:>15}", "Task", "N", "Correct", "Correctness (%)");
        for r in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>7}  {:>15}",
                r.task,
                r.n,
                r.correct,
                pct(r.percent())
            );
        }
        out
    }
}
