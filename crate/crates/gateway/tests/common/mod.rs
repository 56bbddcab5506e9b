#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::routing::post;
use axum::Router;
use geoagent_core::llm::{BackendConfig, ScriptedBackend};
pub use geoagent_core::planner::StreamEvent;
use geoagent_core::planner::Planner;
use geoagent_core::remote::spawn_router;
use geoagent_core::tools::ToolRunner;
use geoagent_gateway::config::load_registry;
use geoagent_gateway::{router, AppState, Engine, GatewayConfig};
use serde_json::Value;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    repo_root().join("fixtures")
}

pub fn config(script: &str) -> GatewayConfig {
    GatewayConfig {
        tools_dir: repo_root().join("config/tools"),
        backend: BackendConfig::Scripted {
            script: fixtures().join(script),
        },
        fixtures: Some(fixtures().join("manifest.json")),
        ..Default::default()
    }
}

/// Starts the HTTP service around `planner`; returns its base URL.
pub async fn serve(planner: Planner) -> String {
    let (addr, _handle) = spawn_router(router(AppState::new(planner, None))).await.expect("bind");
    format!("http://{addr}")
}

/// The gateway backed by the fixture tool server and a scripted model.
pub async fn gateway(script: &str) -> String {
    let engine = Engine::start(&config(script)).await.expect("engine starts");
    serve(engine.planner).await
}

/// A tool server that answers every call with a 500 after `delay`.
pub async fn slow_tool_server(delay: Duration) -> String {
    let app = Router::new().route(
        "/v1/invoke",
        post(move || async move {
            tokio::time::sleep(delay).await;
            (axum::http::StatusCode::INTERNAL_SERVER_ERROR, "busy elsewhere")
        }),
    );
    let (addr, _handle) = spawn_router(app).await.expect("bind");
    format!("http://{addr}")
}

pub struct Client {
    pub base: String,
    pub http: reqwest::Client,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Self {
            base: base.into(),
            http: reqwest::Client::new(),
        }
    }

    pub async fn create_session(&self) -> String {
        let v: Value = self
            .http
            .post(format!("{}/api/sessions", self.base))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        v["session_id"].as_str().unwrap().to_string()
    }

    pub async fn upload(&self, session: &str, name: &str, bytes: Vec<u8>, mime: &str) -> reqwest::Response {
        let part = reqwest::multipart::Part::bytes(bytes)
            .file_name(name.to_string())
            .mime_str(mime)
            .unwrap();
        let form = reqwest::multipart::Form::new().part("file", part);
        self.http
            .post(format!("{}/api/sessions/{session}/files", self.base))
            .multipart(form)
            .send()
            .await
            .unwrap()
    }

    pub async fn upload_fixture(&self, session: &str, name: &str) -> Value {
        let bytes = std::fs::read(fixtures().join(name)).unwrap();
        let resp = self.upload(session, name, bytes, "image/png").await;
        assert_eq!(resp.status(), 200);
        resp.json().await.unwrap()
    }

    pub async fn post_message(&self, session: &str, text: &str) -> reqwest::Response {
        self.http
            .post(format!("{}/api/sessions/{session}/messages", self.base))
            .json(&serde_json::json!({ "text": text }))
            .send()
            .await
            .unwrap()
    }

    pub async fn message(&self, session: &str, text: &str) -> String {
        let resp = self.post_message(session, text).await;
        assert_eq!(resp.status(), 200);
        let v: Value = resp.json().await.unwrap();
        v["message_id"].as_str().unwrap().to_string()
    }

    /// Reads the event stream of one message to its end.
    pub async fn events(&self, session: &str, message: &str) -> Vec<(String, StreamEvent)> {
        let resp = self
            .http
            .get(format!("{}/api/sessions/{session}/events?message_id={message}", self.base))
            .timeout(Duration::from_secs(30))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), 200);
        assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
        parse_sse(&resp.text().await.unwrap())
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.http.get(format!("{}{path}", self.base)).send().await.unwrap()
    }
}

/// Splits an SSE body into (event name, decoded data) pairs; comments are skipped.
pub fn parse_sse(body: &str) -> Vec<(String, StreamEvent)> {
    let mut out = Vec::new();
    for block in body.split("\n\n") {
        let mut name = None;
        let mut data = String::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push_str(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if let Some(name) = name {
            out.push((name, serde_json::from_str(&data).expect("event data is a StreamEvent")));
        }
    }
    out
}

/// Every file name the events announce.
pub fn streamed_files(events: &[(String, StreamEvent)]) -> Vec<String> {
    events
        .iter()
        .filter_map(|(_, e)| match e {
            StreamEvent::Observation { files, .. } => Some(files.iter().map(|f| f.name.clone())),
            _ => None,
        })
        .flatten()
        .collect()
}

pub fn terminal_count(events: &[(String, StreamEvent)]) -> usize {
    events.iter().filter(|(_, e)| e.is_terminal()).count()
}

/// Planner whose remote tools hang for `delay`; used to hold a session busy.
pub async fn slow_planner(turns: &[&str], delay: Duration) -> Planner {
    let registry = load_registry(&repo_root().join("config/tools")).unwrap();
    let runner = ToolRunner::new().with_default_endpoint(&slow_tool_server(delay).await);
    let backend = Arc::new(ScriptedBackend::index(turns.iter().copied()));
    Planner::new(registry, backend, Arc::new(runner))
}
