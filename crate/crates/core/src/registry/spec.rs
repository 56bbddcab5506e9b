use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::react::ActionInput;

/// Kind of a tool input or output field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    ImageFile,
    MaskFile,
    DetectionsFile,
    PolygonFile,
    String,
    Number,
    Category,
    /// Inline polygon written as `x,y;x,y;x,y`.
    Region,
}

impl FieldKind {
    pub fn is_file(self) -> bool {
        matches!(
            self,
            FieldKind::ImageFile | FieldKind::MaskFile | FieldKind::DetectionsFile | FieldKind::PolygonFile
        )
    }

    /// How the kind is described to the model.
    pub fn describe(self) -> &'static str {
        match self {
            FieldKind::ImageFile => "image file name (PNG or JPEG)",
            FieldKind::MaskFile => "label mask file name (PNG with class palette)",
            FieldKind::DetectionsFile => "detections file name (JSON)",
            FieldKind::PolygonFile => "polygons file name (JSON)",
            FieldKind::String => "text",
            FieldKind::Number => "number",
            FieldKind::Category => "one of the supported categories",
            FieldKind::Region => "polygon as \"x,y;x,y;x,y\" in pixels",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default = "yes")]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// One in-context example shown in the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolExample {
    pub query: String,
    pub action_input: ActionInput,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Execution {
    Native { id: String },
    Remote { url: String },
}

/// Tool definition as stored in configuration, one YAML document per tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub input_schema: Vec<FieldSpec>,
    #[serde(default)]
    pub output_schema: Vec<FieldSpec>,
    #[serde(default)]
    pub dependencies: Vec<String>,
    #[serde(default)]
    pub examples: Vec<ToolExample>,
    pub execution: Execution,
}

impl ToolSpec {
    pub fn input(&self, name: &str) -> Option<&FieldSpec> {
        self.input_schema.iter().find(|f| f.name == name)
    }

    /// Empty category list means the tool accepts any category.
    pub fn supports_category(&self, category: &str) -> bool {
        self.categories.is_empty() || self.categories.iter().any(|c| c == category)
    }

    /// Structural checks that need no session: names, schema, examples.
    pub fn check(&self) -> Result<(), String> {
        if !is_snake_case(&self.name) {
            return Err(format!("tool name `{}` is not snake_case", self.name));
        }
        if self.description.trim().is_empty() {
            return Err(format!("tool `{}` has no description", self.name));
        }
        let mut seen = BTreeMap::new();
        for f in &self.input_schema {
            if seen.insert(f.name.as_str(), ()).is_some() {
                return Err(format!("input `{}` declared twice", f.name));
            }
        }
        for (i, ex) in self.examples.iter().enumerate() {
            self.check_example(ex)
                .map_err(|e| format!("example {i} of `{}`: {e}", self.name))?;
        }
        Ok(())
    }

    fn check_example(&self, ex: &ToolExample) -> Result<(), String> {
        for field in &self.input_schema {
            let Some(value) = ex.action_input.get(&field.name) else {
                if field.required {
                    return Err(format!("missing required input `{}`", field.name));
                }
                continue;
            };
            match field.kind {
                FieldKind::Number if value.as_f64().is_none() => {
                    return Err(format!("`{}` must be a number", field.name))
                }
                FieldKind::Category => {
                    let c = value.to_string();
                    if !self.supports_category(&c) {
                        return Err(format!("category `{c}` is not supported"));
                    }
                }
                k if k.is_file() => {
                    let name = value.to_string();
                    if !crate::model::file_name_pattern().is_match(&name) {
                        return Err(format!("`{name}` is not a registry file name"));
                    }
                }
                _ => {}
            }
        }
        for key in ex.action_input.keys() {
            if self.input(key).is_none() {
                return Err(format!("unknown input `{key}`"));
            }
        }
        Ok(())
    }
}

fn is_snake_case(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}
