//! Tool catalog: configuration loading, system prompt rendering and
//! validation of requested actions.

mod prompt;
mod spec;
mod validate;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

pub use prompt::{render_system_prompt, NO_CAPTION};
pub use spec::{Execution, FieldKind, FieldSpec, ToolExample, ToolSpec};
pub use validate::{validate_action, BoundValue, ValidatedInvocation, ValidationError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("a tool named `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid tool spec: {0}")]
    InvalidSpec(String),
    #[error("cannot read tool config {path}: {message}")]
    Config { path: String, message: String },
}

/// Mutable registry; [`ToolRegistryBuilder::freeze`] checks cross-tool
/// invariants and produces the immutable [`ToolRegistry`].
#[derive(Debug, Default, Clone)]
pub struct ToolRegistryBuilder {
    tools: Vec<ToolSpec>,
}

impl ToolRegistryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_tool(&mut self, spec: ToolSpec) -> Result<&mut Self, RegistryError> {
        if self.tools.iter().any(|t| t.name == spec.name) {
            return Err(RegistryError::DuplicateName(spec.name));
        }
        spec.check().map_err(RegistryError::InvalidSpec)?;
        self.tools.push(spec);
        Ok(self)
    }

    /// Registers every YAML document in `text`.
    pub fn register_yaml(&mut self, text: &str, origin: &str) -> Result<&mut Self, RegistryError> {
        for doc in serde_yaml::Deserializer::from_str(text) {
            let value = serde_yaml::Value::deserialize(doc).map_err(|e| RegistryError::Config {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
            if value.is_null() {
                continue;
            }
            let spec: ToolSpec = serde_yaml::from_value(value).map_err(|e| RegistryError::Config {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
            self.register_tool(spec)?;
        }
        Ok(self)
    }

    /// Loads `*.yaml` / `*.yml` files of `dir` in file name order.
    pub fn load_dir(dir: &Path) -> Result<Self, RegistryError> {
        let config_err = |message: String| RegistryError::Config {
            path: dir.display().to_string(),
            message,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| config_err(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("yaml" | "yml")))
            .collect();
        paths.sort();
        let mut builder = Self::new();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| RegistryError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            builder.register_yaml(&text, &path.display().to_string())?;
        }
        Ok(builder)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn freeze(self) -> Result<ToolRegistry, RegistryError> {
        let names: HashSet<&str> = self.tools.iter().map(|t| t.name.as_str()).collect();
        for t in &self.tools {
            for d in &t.dependencies {
                if !names.contains(d.as_str()) {
                    return Err(RegistryError::InvalidSpec(format!(
                        "`{}` depends on unregistered tool `{d}`",
                        t.name
                    )));
                }
            }
        }
        check_acyclic(&self.tools)?;
        Ok(ToolRegistry { tools: self.tools })
    }
}

fn check_acyclic(tools: &[ToolSpec]) -> Result<(), RegistryError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let index: HashMap<&str, usize> = tools.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let mut marks = vec![Mark::New; tools.len()];
    fn visit(
        i: usize,
        tools: &[ToolSpec],
        index: &HashMap<&str, usize>,
        marks: &mut [Mark],
    ) -> Result<(), RegistryError> {
        match marks[i] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                return Err(RegistryError::InvalidSpec(format!(
                    "dependency cycle through `{}`",
                    tools[i].name
                )))
            }
            Mark::New => {}
        }
        marks[i] = Mark::Active;
        for d in &tools[i].dependencies {
            visit(index[d.as_str()], tools, index, marks)?;
        }
        marks[i] = Mark::Done;
        Ok(())
    }
    for i in 0..tools.len() {
        visit(i, tools, &index, &mut marks)?;
    }
    Ok(())
}

/// Frozen, immutable tool catalog; share it behind an `Arc`.
#[derive(Debug, Clone)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }
}
