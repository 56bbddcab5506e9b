//! Engine for answering questions about remote sensing images by letting a
//! language model call perception and geometry tools.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the tools.

mod scalar;

pub mod eval;
pub mod geometry;
pub mod llm;
pub mod model;
pub mod native;
pub mod planner;
pub mod react;
pub mod registry;
pub mod remote;
pub mod tools;

pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type GradientField = native::Gradients<f32>;
pub type CannyParams = native::CannyParams<f32>;
