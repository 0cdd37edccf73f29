//! Pose library JSON: named poses with Euler XYZ rotations in degrees keyed
//! by joint name.
//!
//! ```json
//! {"poses": [{"name": "stand", "rotations": {"neck": [0, 0, 10]}}]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use caninesynth_core::mesh::{PoseLibrary, Skeleton};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub poses: Vec<PoseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub name: String,
    /// Joints not listed keep the identity rotation.
    pub rotations: BTreeMap<String, [f64; 3]>,
}

impl PoseFile {
    pub fn into_library(self, skeleton: &Skeleton) -> Result<PoseLibrary> {
        let mut names: Vec<String> = self
            .poses
            .iter()
            .flat_map(|p| p.rotations.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        let poses: Vec<(String, Vec<[f64; 3]>)> = self
            .poses
            .into_iter()
            .map(|p| {
                let eulers = names
                    .iter()
                    .map(|n| p.rotations.get(n).copied().unwrap_or([0.0; 3]))
                    .collect();
                (p.name, eulers)
            })
            .collect();
        Ok(PoseLibrary::from_euler_degrees(skeleton, &names, &poses)?)
    }

    /// Converts quaternions back to Euler XYZ degrees, omitting identity
    /// joints.
    pub fn of(library: &PoseLibrary, skeleton: &Skeleton) -> Self {
        let poses = library
            .poses()
            .iter()
            .map(|p| PoseEntry {
                name: p.name.clone(),
                rotations: p
                    .rotations
                    .iter()
                    .zip(skeleton.joints())
                    .filter_map(|(q, j)| {
                        let e = q.to_euler_xyz_deg();
                        (e.iter().any(|a| a.abs() > 1e-12)).then(|| (j.name.clone(), e))
                    })
                    .collect(),
            })
            .collect();
        Self { poses }
    }
}

pub fn load_poses(path: &Path, skeleton: &Skeleton) -> Result<PoseLibrary> {
    read_json::<PoseFile>(path)?.into_library(skeleton)
}

pub fn save_poses(library: &PoseLibrary, skeleton: &Skeleton, path: &Path) -> Result<()> {
    write_json(path, &PoseFile::of(library, skeleton))
}
