#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use geoagent_core::llm::{load_script, ChatBackend};
use geoagent_core::model::{Session, MIME_PNG};
use geoagent_core::planner::Planner;
use geoagent_core::registry::{ToolRegistry, ToolRegistryBuilder};
use geoagent_core::remote::{fixture_router, spawn_router, FixtureService};
use geoagent_core::tools::ToolRunner;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    repo_root().join("fixtures")
}

pub fn registry() -> Arc<ToolRegistry> {
    Arc::new(
        ToolRegistryBuilder::load_dir(&repo_root().join("config/tools"))
            .expect("tool specs load")
            .freeze()
            .expect("tool specs are consistent"),
    )
}

/// Starts the fixture perception service; returns its base URL.
pub async fn fixture_server() -> String {
    let service = FixtureService::load(&fixtures().join("manifest.json")).expect("manifest loads");
    let (addr, _handle) = spawn_router(fixture_router(service)).await.expect("bind");
    format!("http://{addr}")
}

pub fn runner(endpoint: &str) -> Arc<ToolRunner> {
    Arc::new(ToolRunner::new().with_default_endpoint(endpoint))
}

pub fn script(name: &str) -> Arc<dyn ChatBackend> {
    Arc::new(load_script(&fixtures().join(name)).expect("script loads"))
}

pub fn planner(backend: Arc<dyn ChatBackend>, endpoint: &str) -> Planner {
    Planner::new(registry(), backend, runner(endpoint))
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixtures().join(name)).expect("fixture exists")
}

/// New session with `image` uploaded (and captioned) as `u000_<stem>.png`.
pub async fn session_with(planner: &Planner, id: &str, image: &str) -> Session {
    let mut s = Session::new(id);
    planner
        .ingest_image(&mut s, image, MIME_PNG, fixture_bytes(image))
        .await
        .expect("upload");
    s
}

/// An endpoint nothing listens on.
pub async fn dead_endpoint() -> String {
    let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}
