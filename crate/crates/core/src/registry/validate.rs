use std::collections::BTreeMap;

use crate::geometry::Point;
use crate::model::{FileRef, ModelError, Session, MIME_JPEG, MIME_JSON, MIME_PNG};
use crate::react::ActionInput;

use super::{FieldKind, ToolRegistry, ToolSpec};

/// Input value checked against its declared kind.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundValue {
    File(FileRef),
    Text(String),
    Number(f64),
    Category(String),
    Region(Vec<Point<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedInvocation {
    pub tool: ToolSpec,
    pub inputs: BTreeMap<String, BoundValue>,
}

impl ValidatedInvocation {
    pub fn file(&self, name: &str) -> Option<&FileRef> {
        match self.inputs.get(name) {
            Some(BoundValue::File(f)) => Some(f),
            _ => None,
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match self.inputs.get(name) {
            Some(BoundValue::Text(s) | BoundValue::Category(s)) => Some(s),
            _ => None,
        }
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        match self.inputs.get(name) {
            Some(BoundValue::Number(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn region(&self, name: &str) -> Option<&[Point<f64>]> {
        match self.inputs.get(name) {
            Some(BoundValue::Region(r)) => Some(r),
            _ => None,
        }
    }
}

/// Why a requested action was refused. The message is written for the model
/// and is fed back as the step's observation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("there is no tool named `{0}`; available tools: {1}")]
    UnknownTool(String, String),
    #[error("input `{field}` is required by {tool}")]
    MissingInput { tool: String, field: String },
    /// The message names the field, not the file, so a made-up name is
    /// never repeated back as if it were real.
    #[error("input `{field}` names a file that does not exist in this session; use only file names listed in the prompt or in observations, copied exactly")]
    UnknownFile { field: String, name: String },
    #[error("{tool} does not support category `{category}`; supported categories: {}. If none of them fits, tell the user this request is not supported", .supported.join(", "))]
    UnsupportedCategory {
        tool: String,
        category: String,
        supported: Vec<String>,
    },
    #[error("input `{field}` of {tool} is invalid: {reason}")]
    InvalidInput {
        tool: String,
        field: String,
        reason: String,
    },
}

fn accepted_mimes(kind: FieldKind) -> &'static [&'static str] {
    match kind {
        FieldKind::ImageFile => &[MIME_PNG, MIME_JPEG],
        FieldKind::MaskFile => &[MIME_PNG],
        FieldKind::DetectionsFile | FieldKind::PolygonFile => &[MIME_JSON],
        _ => &[],
    }
}

fn parse_region(text: &str) -> Result<Vec<Point<f64>>, String> {
    let mut pts = Vec::new();
    for pair in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (x, y) = pair
            .split_once(',')
            .ok_or_else(|| format!("`{pair}` is not an `x,y` pair"))?;
        let x: f64 = x.trim().parse().map_err(|_| format!("`{x}` is not a number"))?;
        let y: f64 = y.trim().parse().map_err(|_| format!("`{y}` is not a number"))?;
        pts.push(Point::new(x, y));
    }
    if pts.len() < 3 {
        return Err("a region needs at least 3 points".into());
    }
    Ok(pts)
}

/// Checks a parsed action against the registry and the session's files.
pub fn validate_action(
    registry: &ToolRegistry,
    session: &Session,
    action_name: &str,
    action_input: &ActionInput,
) -> Result<ValidatedInvocation, ValidationError> {
    let spec = registry
        .get(action_name)
        .ok_or_else(|| ValidationError::UnknownTool(action_name.to_string(), registry.names().join(", ")))?;
    let invalid = |field: &str, reason: String| ValidationError::InvalidInput {
        tool: spec.name.clone(),
        field: field.to_string(),
        reason,
    };

    for key in action_input.keys() {
        if spec.input(key).is_none() {
            let known: Vec<&str> = spec.input_schema.iter().map(|f| f.name.as_str()).collect();
            return Err(invalid(key, format!("unknown input; expected one of: {}", known.join(", "))));
        }
    }

    let mut inputs = BTreeMap::new();
    for field in &spec.input_schema {
        let Some(value) = action_input.get(&field.name) else {
            if field.required {
                return Err(ValidationError::MissingInput {
                    tool: spec.name.clone(),
                    field: field.name.clone(),
                });
            }
            continue;
        };
        let bound = match field.kind {
            k if k.is_file() => {
                let name = value.to_string();
                let file = session.files.resolve_file(&name).map_err(|e| match e {
                    ModelError::UnknownFile(name) => ValidationError::UnknownFile {
                        field: field.name.clone(),
                        name,
                    },
                    other => invalid(&field.name, other.to_string()),
                })?;
                if !accepted_mimes(k).contains(&file.mime.as_str()) {
                    return Err(invalid(
                        &field.name,
                        format!("`{}` is {}, expected a {}", file.name, file.mime, k.describe()),
                    ));
                }
                BoundValue::File(file)
            }
            FieldKind::Number => BoundValue::Number(
                value
                    .as_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(&field.name, format!("`{value}` is not a number")))?,
            ),
            FieldKind::Category => {
                let category = value.to_string();
                if !spec.supports_category(&category) {
                    return Err(ValidationError::UnsupportedCategory {
                        tool: spec.name.clone(),
                        category,
                        supported: spec.categories.clone(),
                    });
                }
                BoundValue::Category(category)
            }
            FieldKind::Region => {
                BoundValue::Region(parse_region(&value.to_string()).map_err(|r| invalid(&field.name, r))?)
            }
            _ => BoundValue::Text(value.to_string()),
        };
        inputs.insert(field.name.clone(), bound);
    }
    Ok(ValidatedInvocation {
        tool: spec.clone(),
        inputs,
    })
}
