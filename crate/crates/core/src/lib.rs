//! Core algorithms for generating synthetic quadruped images with paired
//! annotations.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It covers:
//!
//! - [`pca`]: linear shape and texture spaces (fit, project, synthesize).
//! - [`mesh`]: skeletons, forward kinematics, linear blend skinning, the
//!   procedural rigged dog and the pose library.
//! - [`placement`]: depth and image-position sampling from bounding-box
//!   statistics.
//! - [`render`]: a z-buffered perspective rasterizer producing RGB, silhouette,
//!   part map, depth and projected joints.
//! - [`composite`]: background compositing, 2D repositioning and the full
//!   per-sample generation pipeline.
//! - [`assets`]: procedural stand-ins for the shape and texture models, poses,
//!   box statistics and backgrounds.
//! - [`eval`]: iterative intermeans thresholding and binary segmentation
//!   metrics.
//!
//! The companion `caninesynth` crate carries file formats, the dataset writer
//! and the command line tool.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assets;
pub mod composite;
pub mod error;
pub mod eval;
pub mod image;
pub mod linalg;
pub mod mesh;
pub mod pca;
pub mod placement;
pub mod render;

pub use error::{Error, Result};
