//! Session-scoped file registry.
//!
//! Every file the agent may name is registered here under a deterministic
//! name. Upload names are `u{seq:03}_{stem}.{ext}`, tool outputs are
//! `s{step:03}_{stem}_{tool}.{ext}`. Lookups are exact and case-sensitive,
//! so a name the model made up never resolves.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock, RwLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::raster::{Palette, MIME_JPEG, MIME_JSON, MIME_PNG};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileOrigin {
    UserUpload,
    ToolOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub session_id: String,
    pub name: String,
    pub mime: String,
    pub origin: FileOrigin,
    pub producing_step: Option<usize>,
}

/// Where a new file comes from; decides the name prefix.
#[derive(Debug, Clone, Copy)]
pub enum Provenance<'a> {
    Upload,
    Tool { step: usize, tool: &'a str },
}

pub fn extension_for(mime: &str) -> Option<&'static str> {
    match mime {
        MIME_PNG => Some("png"),
        MIME_JPEG => Some("jpg"),
        MIME_JSON => Some("json"),
        _ => None,
    }
}

pub fn mime_for_extension(ext: &str) -> Option<&'static str> {
    match ext.to_ascii_lowercase().as_str() {
        "png" => Some(MIME_PNG),
        "jpg" | "jpeg" => Some(MIME_JPEG),
        "json" => Some(MIME_JSON),
        _ => None,
    }
}

/// Matches any string shaped like a registry name.
pub fn file_name_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[us]\d{3}_[A-Za-z0-9_-]+\.(?:png|jpg|json)\b").unwrap())
}

fn sanitize_stem(stem: &str) -> String {
    let s: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        "file".to_string()
    } else {
        s
    }
}

#[derive(Debug)]
struct Entry {
    file: FileRef,
    bytes: Arc<Vec<u8>>,
    palette: Option<Palette>,
}

#[derive(Debug)]
struct Inner {
    session_id: String,
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
    uploads: usize,
    dir: Option<PathBuf>,
}

/// Shared handle to one session's files. Clones refer to the same registry,
/// so readers (e.g. an HTTP file route) can resolve names while a plan runs.
#[derive(Debug, Clone)]
pub struct FileRegistry {
    inner: Arc<RwLock<Inner>>,
}

impl FileRegistry {
    /// In-memory registry.
    pub fn new(session_id: impl Into<String>) -> Self {
        Self::build(session_id.into(), None)
    }

    /// Registry that also writes every file to `{root}/{session_id}/{name}`.
    pub fn with_store(session_id: impl Into<String>, root: &Path) -> Result<Self, ModelError> {
        let session_id = session_id.into();
        let dir = root.join(&session_id);
        std::fs::create_dir_all(&dir).map_err(|e| ModelError::Storage(e.to_string()))?;
        Ok(Self::build(session_id, Some(dir)))
    }

    fn build(session_id: String, dir: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(RwLock::new(Inner {
                session_id,
                entries: Vec::new(),
                by_name: HashMap::new(),
                uploads: 0,
                dir,
            })),
        }
    }

    pub fn session_id(&self) -> String {
        self.inner.read().unwrap().session_id.clone()
    }

    pub fn register_file(
        &self,
        provenance: Provenance<'_>,
        suggested_stem: &str,
        mime: &str,
        bytes: Vec<u8>,
    ) -> Result<FileRef, ModelError> {
        if bytes.is_empty() {
            return Err(ModelError::EmptyFile);
        }
        let ext = extension_for(mime).ok_or_else(|| ModelError::UnsupportedMime(mime.to_string()))?;
        let stem = sanitize_stem(suggested_stem);
        let mut inner = self.inner.write().unwrap();
        let (base, origin, step) = match provenance {
            Provenance::Upload => (
                format!("u{:03}_{stem}", inner.uploads),
                FileOrigin::UserUpload,
                None,
            ),
            Provenance::Tool { step, tool } => (
                format!("s{step:03}_{stem}_{}", sanitize_stem(tool)),
                FileOrigin::ToolOutput,
                Some(step),
            ),
        };
        let mut name = format!("{base}.{ext}");
        let mut k = 2;
        while inner.by_name.contains_key(&name) {
            name = format!("{base}_{k}.{ext}");
            k += 1;
        }
        if let Some(dir) = &inner.dir {
            std::fs::write(dir.join(&name), &bytes).map_err(|e| ModelError::Storage(e.to_string()))?;
        }
        if origin == FileOrigin::UserUpload {
            inner.uploads += 1;
        }
        let file = FileRef {
            session_id: inner.session_id.clone(),
            name: name.clone(),
            mime: mime.to_string(),
            origin,
            producing_step: step,
        };
        let idx = inner.entries.len();
        inner.entries.push(Entry {
            file: file.clone(),
            bytes: Arc::new(bytes),
            palette: None,
        });
        inner.by_name.insert(name, idx);
        Ok(file)
    }

    pub fn resolve_file(&self, name: &str) -> Result<FileRef, ModelError> {
        let inner = self.inner.read().unwrap();
        inner
            .by_name
            .get(name)
            .map(|&i| inner.entries[i].file.clone())
            .ok_or_else(|| ModelError::UnknownFile(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner.read().unwrap().by_name.contains_key(name)
    }

    pub fn bytes(&self, name: &str) -> Result<Arc<Vec<u8>>, ModelError> {
        let inner = self.inner.read().unwrap();
        inner
            .by_name
            .get(name)
            .map(|&i| inner.entries[i].bytes.clone())
            .ok_or_else(|| ModelError::UnknownFile(name.to_string()))
    }

    /// Attaches a palette sidecar to a registered mask file.
    pub fn attach_palette(&self, name: &str, palette: Palette) -> Result<(), ModelError> {
        let mut inner = self.inner.write().unwrap();
        let idx = *inner
            .by_name
            .get(name)
            .ok_or_else(|| ModelError::UnknownFile(name.to_string()))?;
        if let Some(dir) = &inner.dir {
            let body = serde_json::to_vec_pretty(&palette).expect("palette serializes");
            std::fs::write(dir.join(format!("{name}.palette.json")), body)
                .map_err(|e| ModelError::Storage(e.to_string()))?;
        }
        inner.entries[idx].palette = Some(palette);
        Ok(())
    }

    pub fn palette(&self, name: &str) -> Result<Option<Palette>, ModelError> {
        let inner = self.inner.read().unwrap();
        inner
            .by_name
            .get(name)
            .map(|&i| inner.entries[i].palette.clone())
            .ok_or_else(|| ModelError::UnknownFile(name.to_string()))
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<String> {
        self.inner
            .read()
            .unwrap()
            .entries
            .iter()
            .map(|e| e.file.name.clone())
            .collect()
    }

    pub fn files(&self) -> Vec<FileRef> {
        self.inner
            .read()
            .unwrap()
            .entries
            .iter()
            .map(|e| e.file.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Name-shaped substrings of `text` that do not resolve.
    pub fn unresolved_mentions(&self, text: &str) -> Vec<String> {
        file_name_pattern()
            .find_iter(text)
            .map(|m| m.as_str().to_string())
            .filter(|n| !self.contains(n))
            .collect()
    }
}
