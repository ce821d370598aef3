//! Map-light localization and navigation on topometric road maps annotated
//! with text-tagged landmarks.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! pin the common types to one precision.

pub mod embedding;
pub mod error;
pub mod geometry;
pub mod localization;
pub mod metrics;
pub mod perception;
pub mod planning;
pub mod scalar;
pub mod simulator;
pub mod world_model;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point2d = geometry::Point2<f64>;
pub type Point2f = geometry::Point2<f32>;
pub type Pose2d = geometry::Pose2<f64>;
pub type Pose2f = geometry::Pose2<f32>;
pub type ParticleSetd = localization::ParticleSet<f64>;
pub type ParticleSetf = localization::ParticleSet<f32>;
pub type FilterConfigd = localization::FilterConfig<f64>;
pub type FilterConfigf = localization::FilterConfig<f32>;
pub type EsdfGridd = perception::Grid2D<f64, f64>;
pub type EsdfGridf = perception::Grid2D<f32, f32>;
pub type Mapd = world_model::TopometricMap<f64>;
pub type Mapf = world_model::TopometricMap<f32>;
