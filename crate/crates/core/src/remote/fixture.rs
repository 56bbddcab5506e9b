//! Deterministic stand-in for the perception model servers. Answers are
//! looked up by the SHA-256 of the submitted image in a manifest; unknown
//! images get a fixed generic answer.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::protocol::{
    ErrorBody, ErrorCode, ErrorResponse, InvokeRequest, InvokeResponse, WireOutputFile, PALETTE_SUFFIX,
};
use crate::model::{Detection, DetectionSet, Palette, PaletteClass, Raster, MIME_JSON, MIME_PNG};

pub const FIXTURE_TOOLS: [&str; 4] = [
    "scene_classification",
    "landuse_classification",
    "object_detection",
    "image_captioning",
];

const FALLBACK_CAPTION: &str = "a remote sensing image";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLabel {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct LanduseEntry {
    mask: PathBuf,
    palette: Palette,
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestEntry {
    #[serde(default)]
    image: Option<PathBuf>,
    #[serde(default)]
    sha256: Option<String>,
    scene: SceneLabel,
    caption: String,
    #[serde(default)]
    detections: Vec<Detection>,
    #[serde(default)]
    landuse: Option<LanduseEntry>,
}

#[derive(Debug, Clone, Deserialize)]
struct Manifest {
    #[serde(default)]
    categories: HashMap<String, Vec<String>>,
    images: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
struct Fixture {
    scene: SceneLabel,
    caption: String,
    detections: Vec<Detection>,
    landuse: Option<(Vec<u8>, Palette)>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Canned perception results keyed by image hash.
#[derive(Debug, Clone, Default)]
pub struct FixtureService {
    fixtures: HashMap<String, Fixture>,
    categories: HashMap<String, Vec<String>>,
}

impl FixtureService {
    pub fn load(manifest_path: &Path) -> Result<Self, FixtureError> {
        let err = |path: &Path, message: String| FixtureError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(manifest_path).map_err(|e| err(manifest_path, e.to_string()))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| err(manifest_path, e.to_string()))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut fixtures = HashMap::new();
        for (i, entry) in manifest.images.into_iter().enumerate() {
            let hash = match (&entry.image, &entry.sha256) {
                (Some(rel), _) => {
                    let p = base.join(rel);
                    sha256_hex(&std::fs::read(&p).map_err(|e| err(&p, e.to_string()))?)
                }
                (None, Some(h)) => h.to_ascii_lowercase(),
                (None, None) => return Err(err(manifest_path, format!("image {i} has neither `image` nor `sha256`"))),
            };
            let landuse = match entry.landuse {
                Some(l) => {
                    let p = base.join(&l.mask);
                    let bytes = std::fs::read(&p).map_err(|e| err(&p, e.to_string()))?;
                    let mask = Raster::decode(&bytes, MIME_PNG).map_err(|e| err(&p, e.to_string()))?;
                    l.palette.check_mask(&mask).map_err(|e| err(&p, e.to_string()))?;
                    Some((mask.encode_png(), l.palette))
                }
                None => None,
            };
            for d in &entry.detections {
                d.validate(None).map_err(|e| err(manifest_path, e.to_string()))?;
            }
            fixtures.insert(
                hash,
                Fixture {
                    scene: entry.scene,
                    caption: entry.caption,
                    detections: entry.detections,
                    landuse,
                },
            );
        }
        Ok(Self {
            fixtures,
            categories: manifest.categories,
        })
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    fn fallback(image: &Raster) -> Fixture {
        Fixture {
            scene: SceneLabel {
                label: "unknown".into(),
                confidence: 0.0,
            },
            caption: FALLBACK_CAPTION.into(),
            detections: Vec::new(),
            landuse: Some((
                Raster::filled(image.width(), image.height(), 0).encode_png(),
                Palette {
                    classes: vec![PaletteClass {
                        id: 0,
                        name: "background".into(),
                        color: [0, 0, 0],
                    }],
                },
            )),
        }
    }

    /// Answers one request. Errors are the 400 replies of the protocol.
    pub fn handle(&self, req: &InvokeRequest) -> Result<InvokeResponse, ErrorBody> {
        let bad = |message: String| ErrorBody {
            code: ErrorCode::BadInput,
            message,
            supported: None,
        };
        if !FIXTURE_TOOLS.contains(&req.tool.as_str()) {
            return Err(ErrorBody {
                code: ErrorCode::UnsupportedTool,
                message: format!("tool `{}` is not served here", req.tool),
                supported: Some(FIXTURE_TOOLS.iter().map(|s| s.to_string()).collect()),
            });
        }
        let category = match req.params.get("category") {
            Some(serde_json::Value::String(c)) => Some(c.as_str()),
            Some(other) => return Err(bad(format!("category must be a string, got {other}"))),
            None => None,
        };
        if let (Some(c), Some(supported)) = (category, self.categories.get(&req.tool)) {
            if !supported.iter().any(|s| s == c) {
                return Err(ErrorBody {
                    code: ErrorCode::UnsupportedCategory,
                    message: format!("{} does not support category `{c}`", req.tool),
                    supported: Some(supported.clone()),
                });
            }
        }
        let image = req.inputs.get("image").ok_or_else(|| bad("missing input `image`".into()))?;
        let bytes = image.decode().map_err(bad)?;
        let raster = Raster::decode(&bytes, &image.mime).map_err(|e| bad(e.to_string()))?;
        let hash = sha256_hex(&bytes);
        let fallback;
        let fixture = match self.fixtures.get(&hash) {
            Some(f) => f,
            None => {
                fallback = Self::fallback(&raster);
                &fallback
            }
        };

        let mut resp = InvokeResponse::default();
        match req.tool.as_str() {
            "scene_classification" => {
                resp.outputs.insert("scene".into(), serde_json::to_value(&fixture.scene).unwrap());
            }
            "image_captioning" => {
                resp.outputs.insert("caption".into(), fixture.caption.clone().into());
            }
            "object_detection" => {
                let dets: Vec<Detection> = fixture
                    .detections
                    .iter()
                    .filter(|d| category.is_none_or(|c| d.category == c))
                    .cloned()
                    .collect();
                resp.outputs.insert("detections".into(), serde_json::to_value(&dets).unwrap());
                let body = serde_json::to_vec(&DetectionSet { detections: dets }).unwrap();
                resp.files.push(WireOutputFile::new("det", MIME_JSON, &body));
            }
            "landuse_classification" => {
                let (mask, palette) = fixture
                    .landuse
                    .clone()
                    .unwrap_or_else(|| Self::fallback(&raster).landuse.unwrap());
                let decoded = Raster::decode(&mask, MIME_PNG).map_err(|e| bad(e.to_string()))?;
                let mut present = [false; 256];
                for &v in decoded.data() {
                    present[v as usize] = true;
                }
                let names: Vec<&str> = palette
                    .classes
                    .iter()
                    .filter(|c| present[c.id as usize])
                    .map(|c| c.name.as_str())
                    .collect();
                resp.outputs.insert("classes_present".into(), names.join(", ").into());
                resp.files.push(WireOutputFile::new("landuse", MIME_PNG, &mask));
                resp.files.push(WireOutputFile::new(
                    &format!("landuse{PALETTE_SUFFIX}"),
                    MIME_JSON,
                    &serde_json::to_vec(&palette).unwrap(),
                ));
            }
            _ => unreachable!(),
        }
        Ok(resp)
    }
}

async fn invoke(State(svc): State<Arc<FixtureService>>, body: Bytes) -> Response {
    let req: InvokeRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            let err = ErrorBody {
                code: ErrorCode::BadInput,
                message: format!("malformed request: {e}"),
                supported: None,
            };
            return (StatusCode::BAD_REQUEST, Json(ErrorResponse { error: err })).into_response();
        }
    };
    match svc.handle(&req) {
        Ok(resp) => Json(resp).into_response(),
        Err(error) => (StatusCode::BAD_REQUEST, Json(ErrorResponse { error })).into_response(),
    }
}

pub fn fixture_router(service: FixtureService) -> Router {
    Router::new()
        .route("/v1/invoke", post(invoke))
        .route("/healthz", get(|| async { "ok" }))
        .layer(DefaultBodyLimit::max(64 * 1024 * 1024))
        .with_state(Arc::new(service))
}

/// Serves `router` on an ephemeral localhost port.
pub async fn spawn_router(router: Router) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, router).await;
    });
    Ok((addr, handle))
}
