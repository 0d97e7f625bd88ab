//! Semantic-conditioned multi-view diffusion at toy scale.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix the common choices.

pub mod diffusion;
pub mod error;
pub mod features;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod scenes;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Camera64 = geometry::Camera<f64>;
pub type Camera32 = geometry::Camera<f32>;
pub type Image64 = geometry::FeatureImage<f64>;
pub type Image32 = geometry::FeatureImage<f32>;
pub type Cloud64 = geometry::FeaturePointCloud<f64>;
pub type Cloud32 = geometry::FeaturePointCloud<f32>;
pub type Schedule64 = diffusion::NoiseSchedule<f64>;
pub type Schedule32 = diffusion::NoiseSchedule<f32>;
