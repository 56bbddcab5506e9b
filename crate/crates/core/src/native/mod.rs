//! Classical image tools that run in-process: Canny edges, mask
//! polygonization and region-aware object counting.

mod canny;
mod contour;
mod count;
mod filter;

pub use canny::{
    canny, canny_gradients, classify, hysteresis, non_maximum_suppression, CannyParams, EdgeClass,
    EDGE,
};
pub use contour::{polygonize, trace_boundaries, PixelRing};
pub use count::{count_objects, CountRequest, CountResult, Region};
pub use filter::{gaussian_blur, gaussian_kernel, sobel_gradients, Direction, Gradients};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NativeError {
    #[error("expected a single-channel raster, got {0} channels")]
    NotGrayscale(u8),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
