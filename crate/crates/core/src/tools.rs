//! Tool execution: native tools run in process, remote tools over HTTP.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::geometry::{Point, Polygon};
use crate::model::{DetectionSet, FileRegistry, Palette, Raster, MIME_JSON, MIME_PNG};
use crate::native::{self, CannyParams, CountRequest, Region};
use crate::registry::{BoundValue, Execution, ValidatedInvocation};
use crate::remote::{into_tool_output, InvokeRequest, RemoteClient, RemoteError, WireFile};

/// A file produced by a tool, before registration.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name_hint: String,
    pub mime: String,
    pub bytes: Vec<u8>,
    pub palette: Option<Palette>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToolOutput {
    pub outputs: Map<String, Value>,
    pub files: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{0}")]
    Failed(String),
    #[error("no native implementation `{0}`")]
    UnknownNative(String),
}

/// One polygon of a polygons file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPolygon {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    pub ring: Vec<Point<f64>>,
}

/// Polygons file body: `{"polygons": [{"class": ..., "ring": [[x, y], ...]}]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolygonSet {
    pub polygons: Vec<LabeledPolygon>,
}

#[derive(Debug, Clone)]
pub struct ToolRunner {
    client: RemoteClient,
    endpoints: HashMap<String, String>,
    default_endpoint: Option<String>,
    timeout: Duration,
}

impl Default for ToolRunner {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolRunner {
    pub fn new() -> Self {
        Self {
            client: RemoteClient::new(),
            endpoints: HashMap::new(),
            default_endpoint: None,
            timeout: Duration::from_secs(60),
        }
    }

    /// Routes `tool` to `endpoint` instead of the URL in its spec.
    pub fn with_endpoint(mut self, tool: &str, endpoint: &str) -> Self {
        self.endpoints.insert(tool.to_string(), endpoint.to_string());
        self
    }

    /// Routes every remote tool without its own override to `endpoint`.
    pub fn with_default_endpoint(mut self, endpoint: &str) -> Self {
        self.default_endpoint = Some(endpoint.to_string());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub async fn run(&self, inv: &ValidatedInvocation, files: &FileRegistry) -> Result<ToolOutput, ToolError> {
        match &inv.tool.execution {
            Execution::Native { id } => {
                let (id, inv, files) = (id.clone(), inv.clone(), files.clone());
                let task = tokio::task::spawn_blocking(move || run_native(&id, &inv, &files));
                match tokio::time::timeout(self.timeout, task).await {
                    Ok(joined) => joined.map_err(|e| ToolError::Failed(format!("tool panicked: {e}")))?,
                    Err(_) => Err(ToolError::Timeout(self.timeout)),
                }
            }
            Execution::Remote { url } => {
                let endpoint = self
                    .endpoints
                    .get(&inv.tool.name)
                    .or(self.default_endpoint.as_ref())
                    .unwrap_or(url);
                let request = remote_request(inv, files)?;
                let resp = self.client.invoke(endpoint, &request, self.timeout).await?;
                Ok(into_tool_output(resp)?)
            }
        }
    }
}

fn remote_request(inv: &ValidatedInvocation, files: &FileRegistry) -> Result<InvokeRequest, ToolError> {
    let mut request = InvokeRequest {
        tool: inv.tool.name.clone(),
        inputs: Default::default(),
        params: Map::new(),
    };
    for (key, value) in &inv.inputs {
        match value {
            BoundValue::File(f) => {
                let bytes = files.bytes(&f.name).map_err(|e| ToolError::Failed(e.to_string()))?;
                request.inputs.insert(key.clone(), WireFile::new(&f.name, &f.mime, &bytes));
            }
            BoundValue::Text(s) | BoundValue::Category(s) => {
                request.params.insert(key.clone(), s.clone().into());
            }
            BoundValue::Number(v) => {
                request.params.insert(key.clone(), json!(v));
            }
            BoundValue::Region(pts) => {
                let text = pts.iter().map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(";");
                request.params.insert(key.clone(), text.into());
            }
        }
    }
    Ok(request)
}

fn failed(e: impl std::fmt::Display) -> ToolError {
    ToolError::Failed(e.to_string())
}

fn load_raster(inv: &ValidatedInvocation, files: &FileRegistry, field: &str) -> Result<Option<Raster>, ToolError> {
    let Some(f) = inv.file(field) else { return Ok(None) };
    let bytes = files.bytes(&f.name).map_err(failed)?;
    Raster::decode(&bytes, &f.mime).map(Some).map_err(failed)
}

fn load_mask(
    inv: &ValidatedInvocation,
    files: &FileRegistry,
    field: &str,
) -> Result<Option<(Raster, Palette)>, ToolError> {
    let Some(f) = inv.file(field) else { return Ok(None) };
    let mask = load_raster(inv, files, field)?.expect("file is bound");
    let palette = files
        .palette(&f.name)
        .map_err(failed)?
        .ok_or_else(|| failed(format!("`{}` has no class palette, so it is not a label mask", f.name)))?;
    palette.check_mask(&mask).map_err(failed)?;
    Ok(Some((mask, palette)))
}

fn class_id(palette: &Palette, class: &str, file: &str) -> Result<u8, ToolError> {
    palette.id_of(class).ok_or_else(|| {
        let names: Vec<&str> = palette.classes.iter().map(|c| c.name.as_str()).collect();
        failed(format!("class `{class}` is not in `{file}`; its classes are: {}", names.join(", ")))
    })
}

fn run_native(id: &str, inv: &ValidatedInvocation, files: &FileRegistry) -> Result<ToolOutput, ToolError> {
    match id {
        "canny" => edge_detection(inv, files),
        "polygonize" => polygonization(inv, files),
        "count" => object_counting(inv, files),
        other => Err(ToolError::UnknownNative(other.to_string())),
    }
}

fn edge_detection(inv: &ValidatedInvocation, files: &FileRegistry) -> Result<ToolOutput, ToolError> {
    let image = load_raster(inv, files, "image")?.ok_or_else(|| failed("missing input `image`"))?;
    let defaults = CannyParams::<f32>::default();
    let param = |name: &str, d: f32| inv.number(name).map(|v| v as f32).unwrap_or(d);
    let params = CannyParams {
        sigma: param("sigma", defaults.sigma),
        low_ratio: param("low_threshold", defaults.low_ratio),
        high_ratio: param("high_threshold", defaults.high_ratio),
    };
    let edges = native::canny(&image.to_gray(), &params).map_err(failed)?;
    let count = edges.data().iter().filter(|&&v| v == native::EDGE).count();
    let mut outputs = Map::new();
    outputs.insert("edge_pixels".into(), count.into());
    Ok(ToolOutput {
        outputs,
        files: vec![OutputFile {
            name_hint: "edges".into(),
            mime: MIME_PNG.into(),
            bytes: edges.encode_png(),
            palette: None,
        }],
    })
}

fn polygonization(inv: &ValidatedInvocation, files: &FileRegistry) -> Result<ToolOutput, ToolError> {
    let (mask, palette) = load_mask(inv, files, "mask")?.ok_or_else(|| failed("missing input `mask`"))?;
    let class = inv.text("category").ok_or_else(|| failed("missing input `category`"))?;
    let id = class_id(&palette, class, &inv.file("mask").expect("bound").name)?;
    let epsilon = inv.number("epsilon").unwrap_or(1.0);
    let polys = native::polygonize(&mask, id, epsilon).map_err(failed)?;
    let set = PolygonSet {
        polygons: polys
            .iter()
            .map(|p| LabeledPolygon {
                class: Some(class.to_string()),
                ring: p.ring().to_vec(),
            })
            .collect(),
    };
    let mut outputs = Map::new();
    outputs.insert("polygons".into(), set.polygons.len().into());
    outputs.insert("class".into(), class.into());
    Ok(ToolOutput {
        outputs,
        files: vec![OutputFile {
            name_hint: "polygons".into(),
            mime: MIME_JSON.into(),
            bytes: serde_json::to_vec(&set).expect("polygons serialize"),
            palette: None,
        }],
    })
}

fn object_counting(inv: &ValidatedInvocation, files: &FileRegistry) -> Result<ToolOutput, ToolError> {
    let det_file = inv.file("detections").ok_or_else(|| failed("missing input `detections`"))?;
    let set: DetectionSet = serde_json::from_slice(&files.bytes(&det_file.name).map_err(failed)?)
        .map_err(|e| failed(format!("`{}` is not a detections file: {e}", det_file.name)))?;

    let given = ["region_mask", "region_polygons", "region"]
        .iter()
        .filter(|k| inv.inputs.contains_key(**k))
        .count();
    if given > 1 {
        return Err(failed("give at most one of region_mask, region_polygons and region"));
    }

    let region: Option<Region<f64>> = if let Some((mask, palette)) = load_mask(inv, files, "region_mask")? {
        let class = inv
            .text("region_class")
            .ok_or_else(|| failed("region_mask needs region_class"))?;
        let id = class_id(&palette, class, &inv.file("region_mask").expect("bound").name)?;
        Some(Region::mask(mask, &palette, id).map_err(failed)?)
    } else if let Some(f) = inv.file("region_polygons") {
        let set: PolygonSet = serde_json::from_slice(&files.bytes(&f.name).map_err(failed)?)
            .map_err(|e| failed(format!("`{}` is not a polygons file: {e}", f.name)))?;
        let polys = set
            .polygons
            .into_iter()
            .map(|p| Polygon::new(p.ring).map_err(failed))
            .collect::<Result<Vec<_>, _>>()?;
        Some(Region::Polygons(polys))
    } else if let Some(pts) = inv.region("region") {
        Some(Region::Polygons(vec![Polygon::new(pts.to_vec()).map_err(failed)?]))
    } else {
        None
    };

    let result = native::count_objects(&CountRequest {
        detections: set.detections,
        category: inv.text("category").map(str::to_string),
        region,
    });
    let mut outputs = Map::new();
    outputs.insert("count".into(), result.count.into());
    Ok(ToolOutput { outputs, files: vec![] })
}
