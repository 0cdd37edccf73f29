//! File formats, dataset generation and directory evaluation on top of
//! `caninesynth-core`.
//!
//! - [`formats`]: PCA models, OBJ meshes with rig sidecars, pose libraries,
//!   placement statistics, PNG channels, float maps and backgrounds.
//! - [`config`]: generation configs and asset packs.
//! - [`dataset`]: parallel, resumable dataset writer and its manifest.
//! - [`evaluate`]: scoring prediction directories against ground truth.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod formats;

pub use caninesynth_core as core;
pub use error::{Error, Result};
