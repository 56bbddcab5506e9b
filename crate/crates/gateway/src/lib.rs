//! HTTP service and command-line front end for the geoagent engine.

pub mod cli;
pub mod config;
pub mod server;

pub use config::{Engine, GatewayConfig, Limits};
pub use server::{router, AppState};

/// Builds the engine from `cfg` and serves until the process stops.
pub async fn serve(cfg: GatewayConfig) -> anyhow::Result<()> {
    let engine = Engine::start(&cfg).await?;
    let state = AppState::new(engine.planner, cfg.store_dir.clone());
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
