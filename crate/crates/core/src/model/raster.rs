use std::io::Cursor;

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use super::ModelError;

pub const MIME_PNG: &str = "image/png";
pub const MIME_JPEG: &str = "image/jpeg";
pub const MIME_JSON: &str = "application/json";

/// Row-major 8-bit image with one (gray or label) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidRaster(format!("empty dimensions {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ModelError::InvalidRaster(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ModelError::InvalidRaster(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ModelError> {
        Self::new(width, height, 1, data)
    }

    /// Single-channel raster filled with `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Sample of channel 0 at `(x, y)`.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y as usize * self.width as usize + x as usize) * self.channels as usize]
    }

    /// Luma conversion (ITU-R 601 weights). Gray rasters are returned as is.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| {
                let l = 299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32;
                ((l + 500) / 1000) as u8
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Decodes PNG or JPEG bytes into an 8-bit raster. Alpha is dropped.
    pub fn decode(bytes: &[u8], mime: &str) -> Result<Raster, ModelError> {
        let format = match mime {
            MIME_PNG => ImageFormat::Png,
            MIME_JPEG => ImageFormat::Jpeg,
            other => return Err(ModelError::UnsupportedMime(other.to_string())),
        };
        let img = image::load_from_memory_with_format(bytes, format)
            .map_err(|e| ModelError::MalformedImage(e.to_string()))?;
        let (w, h) = (img.width(), img.height());
        let (channels, data) = match img {
            DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
            DynamicImage::ImageLumaA8(buf) => (1, DynamicImage::ImageLumaA8(buf).to_luma8().into_raw()),
            DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
            DynamicImage::ImageRgba8(buf) => (3, DynamicImage::ImageRgba8(buf).to_rgb8().into_raw()),
            other => return Err(ModelError::UnsupportedBitDepth(format!("{:?}", other.color()))),
        };
        Raster::new(w, h, channels, data)
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let img = match self.channels {
            1 => DynamicImage::ImageLuma8(
                image::GrayImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("raster invariants hold"),
            ),
            _ => DynamicImage::ImageRgb8(
                image::RgbImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("raster invariants hold"),
            ),
        };
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .expect("png encoding into memory does not fail");
        out.into_inner()
    }
}

/// Class id to name and display color mapping for label rasters. Stored next
/// to a mask file as `{name}.palette.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub classes: Vec<PaletteClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteClass {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

impl Palette {
    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    pub fn contains_id(&self, id: u8) -> bool {
        self.classes.iter().any(|c| c.id == id)
    }

    /// Checks that every sample of `mask` is a palette class.
    pub fn check_mask(&self, mask: &Raster) -> Result<(), ModelError> {
        if !mask.is_gray() {
            return Err(ModelError::InvalidRaster("label mask must have one channel".into()));
        }
        let mut seen = [false; 256];
        for &v in mask.data() {
            seen[v as usize] = true;
        }
        for (id, _) in seen.iter().enumerate().filter(|(_, s)| **s) {
            if !self.contains_id(id as u8) {
                return Err(ModelError::InvalidRaster(format!("mask value {id} is not in the palette")));
            }
        }
        Ok(())
    }
}

/// One detected object. `bbox` is `[x_min, y_min, x_max, y_max]` in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: String,
    pub bbox: [f64; 4],
    pub score: f64,
}

impl Detection {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.bbox[0] + self.bbox[2]) / 2.0,
            (self.bbox[1] + self.bbox[3]) / 2.0,
        )
    }

    /// Checks box ordering, score range and, when given, image bounds.
    pub fn validate(&self, bounds: Option<(u32, u32)>) -> Result<(), ModelError> {
        let [x0, y0, x1, y1] = self.bbox;
        if !(x0 < x1 && y0 < y1) {
            return Err(ModelError::InvalidDetection(format!("degenerate box {:?}", self.bbox)));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(ModelError::InvalidDetection(format!("score {} outside [0,1]", self.score)));
        }
        if let Some((w, h)) = bounds {
            if x0 < 0.0 || y0 < 0.0 || x1 > w as f64 || y1 > h as f64 {
                return Err(ModelError::InvalidDetection(format!(
                    "box {:?} outside {w}x{h} image",
                    self.bbox
                )));
            }
        }
        Ok(())
    }
}

/// Detections file body: `{"detections": [...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}
