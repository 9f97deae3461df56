//! Multi-view stereo with deformable PatchMatch patches.
//!
//! The pipeline estimates one depth and normal map per view by PatchMatch
//! over plane hypotheses. Unreliable pixels borrow support from nearby
//! reliable anchors; anchors are filtered by a region prior built from a
//! monocular depth map and by per-view visibility. The maps are fused into
//! a point cloud.

pub mod camera;
pub mod cloud;
pub mod config;
pub mod cost;
pub mod edge_prior;
pub mod engine;
pub mod eval;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod par;
pub mod raster;
pub mod rng;
pub mod scene_io;
pub mod visibility;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use camera::CameraModel;
pub use cloud::{CloudPoint, PointCloud};
pub use config::Config;
pub use cost::{CostValue, PatchSpec};
pub use error::{EvalError, FitError, GeometryError, IoError, PipelineError};
pub use geometry::{EpipolarLine, PlaneHypothesis};
pub use raster::{DepthMapBuffer, GrayImage, NormalMap};
