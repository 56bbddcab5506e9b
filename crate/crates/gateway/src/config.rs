use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use geoagent_core::llm::{BackendConfig, OpenAiConfig};
use geoagent_core::planner::{Planner, PlannerLimits};
use geoagent_core::registry::{ToolRegistry, ToolRegistryBuilder};
use geoagent_core::remote::{fixture_router, spawn_router, FixtureService};
use geoagent_core::tools::ToolRunner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_steps: usize,
    pub max_parse_retries: usize,
    pub tool_timeout_secs: f64,
}

impl Default for Limits {
    fn default() -> Self {
        let p = PlannerLimits::default();
        Self {
            max_steps: p.max_steps,
            max_parse_retries: p.max_parse_retries,
            tool_timeout_secs: 60.0,
        }
    }
}

/// Service and engine settings, read from YAML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    /// Session files are written under `{store_dir}/{session}/` when set.
    pub store_dir: Option<PathBuf>,
    pub tools_dir: PathBuf,
    pub backend: BackendConfig,
    /// Fixture manifest; when set, an in-process fixture server answers
    /// every remote tool without its own endpoint.
    pub fixtures: Option<PathBuf>,
    /// Default endpoint for remote tools, overriding their spec URLs.
    pub tool_endpoint: Option<String>,
    /// Per-tool endpoints.
    pub tool_endpoints: BTreeMap<String, String>,
    pub limits: Limits,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store_dir: None,
            tools_dir: PathBuf::from("config/tools"),
            backend: BackendConfig::OpenaiCompatible(OpenAiConfig::default()),
            fixtures: None,
            tool_endpoint: None,
            tool_endpoints: BTreeMap::new(),
            limits: Limits::default(),
        }
    }
}

impl GatewayConfig {
    pub fn from_yaml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_yaml::from_str(text).context("invalid gateway config")?;
        Ok(cfg)
    }

    /// Loads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_yaml(&text).with_context(|| path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.tools_dir);
        if let Some(p) = self.store_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.fixtures.as_mut() {
            fix(p);
        }
        if let BackendConfig::Scripted { script } = &mut self.backend {
            fix(script);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !self.tools_dir.is_dir() {
            bail!("tools_dir {} is not a directory", self.tools_dir.display());
        }
        if let Some(f) = &self.fixtures {
            if !f.is_file() {
                bail!("fixtures manifest {} does not exist", f.display());
            }
        }
        if let BackendConfig::Scripted { script } = &self.backend {
            if !script.is_file() {
                bail!("script {} does not exist", script.display());
            }
        }
        if let Some(d) = &self.store_dir {
            if d.exists() && !d.is_dir() {
                bail!("store_dir {} is not a directory", d.display());
            }
        }
        if self.limits.max_steps == 0 {
            bail!("limits.max_steps must be at least 1");
        }
        if !(self.limits.tool_timeout_secs > 0.0) {
            bail!("limits.tool_timeout_secs must be positive");
        }
        Ok(())
    }
}

/// A ready planner plus whatever background servers it relies on.
pub struct Engine {
    pub planner: Planner,
    /// Address of the in-process fixture server, if one was started.
    pub fixture_addr: Option<SocketAddr>,
}

pub fn load_registry(dir: &Path) -> anyhow::Result<Arc<ToolRegistry>> {
    let reg = ToolRegistryBuilder::load_dir(dir)
        .with_context(|| format!("loading tool specs from {}", dir.display()))?
        .freeze()?;
    Ok(Arc::new(reg))
}

impl Engine {
    pub async fn start(cfg: &GatewayConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let registry = load_registry(&cfg.tools_dir)?;
        let backend = cfg.backend.build()?;
        tracing::info!(backend = %backend.describe(), "language model backend ready");

        let mut runner = ToolRunner::new().with_timeout(Duration::from_secs_f64(cfg.limits.tool_timeout_secs));
        let mut fixture_addr = None;
        if let Some(manifest) = &cfg.fixtures {
            let service = FixtureService::load(manifest)?;
            let (addr, _handle) = spawn_router(fixture_router(service)).await?;
            tracing::info!(%addr, "fixture tool server started");
            runner = runner.with_default_endpoint(&format!("http://{addr}"));
            fixture_addr = Some(addr);
        } else if let Some(url) = &cfg.tool_endpoint {
            runner = runner.with_default_endpoint(url);
        }
        for (tool, url) in &cfg.tool_endpoints {
            if registry.get(tool).is_none() {
                bail!("tool_endpoints names unknown tool `{tool}`");
            }
            runner = runner.with_endpoint(tool, url);
        }
        let planner = Planner::new(registry, backend, Arc::new(runner)).with_limits(PlannerLimits {
            max_steps: cfg.limits.max_steps,
            max_parse_retries: cfg.limits.max_parse_retries,
        });
        Ok(Self { planner, fixture_addr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaml_round_trip_and_defaults() {
        let cfg = GatewayConfig::from_yaml(
            "listen: 0.0.0.0:9000\nbackend: {kind: scripted, script: s.yaml}\nlimits: {max_steps: 4}\n",
        )
        .unwrap();
        assert_eq!(cfg.listen.port(), 9000);
        assert_eq!(cfg.limits.max_steps, 4);
        assert_eq!(cfg.limits.max_parse_retries, 2);
        let back = GatewayConfig::from_yaml(&serde_yaml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(GatewayConfig::from_yaml("listen: nowhere").is_err());
        assert!(GatewayConfig::from_yaml("colour: blue").is_err());
    }

    #[test]
    fn openai_backend_block() {
        let cfg = GatewayConfig::from_yaml(
            "backend:\n  kind: openai_compatible\n  base_url: http://localhost:8000\n  model: m\n  temperature: 0.0\n\
             tool_endpoints: {object_detection: 'http://d:9000'}\n",
        )
        .unwrap();
        let BackendConfig::OpenaiCompatible(o) = &cfg.backend else {
            panic!("{:?}", cfg.backend)
        };
        assert_eq!((o.base_url.as_str(), o.model.as_str()), ("http://localhost:8000", "m"));
        assert_eq!(o.api_key_env, "OPENAI_API_KEY");
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = GatewayConfig {
            backend: BackendConfig::Scripted { script: "s.yaml".into() },
            fixtures: Some("m.json".into()),
            ..Default::default()
        };
        cfg.rebase(Path::new("/etc/geo"));
        assert_eq!(cfg.tools_dir, PathBuf::from("/etc/geo/config/tools"));
        assert_eq!(cfg.fixtures, Some(PathBuf::from("/etc/geo/m.json")));
        assert!(matches!(cfg.backend, BackendConfig::Scripted { ref script } if script == Path::new("/etc/geo/s.yaml")));
    }

    #[test]
    fn validation_catches_missing_paths() {
        let cfg = GatewayConfig {
            tools_dir: "/definitely/not/here".into(),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
