//! Session state and the raster/vector types exchanged between tools.

mod files;
mod raster;
mod session;

pub use files::{
    extension_for, file_name_pattern, mime_for_extension, FileOrigin, FileRef, FileRegistry,
    Provenance,
};
pub use raster::{
    Detection, DetectionSet, Palette, PaletteClass, Raster, MIME_JPEG, MIME_JSON, MIME_PNG,
};
pub use session::{Exchange, Session, VisualCue};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown file `{0}`: no file with this exact name was registered in this session")]
    UnknownFile(String),
    #[error("unsupported mime type `{0}`")]
    UnsupportedMime(String),
    #[error("refusing to register an empty file")]
    EmptyFile,
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("unsupported bit depth or color type: {0}")]
    UnsupportedBitDepth(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("storage failure: {0}")]
    Storage(String),
}
