//! Rigged meshes: skeleton hierarchy, skinning weights, forward kinematics and
//! linear blend skinning.

mod pose;
mod procedural;

pub use pose::{sample_root_rotation, NamedPose, PoseLibrary, RootRotation, UprightBounds};
pub use procedural::{
    generate_canonical_dog, joint_names, planned_face_count, procedural_textures, shape_variants, DogConfig,
    DogProportions, JOINT_COUNT,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Affine, Quat, Rigid, Vec3};
use crate::pca::{fit_pca, FeatureLayout, PcaModel, SampleMatrix};

/// Tolerance on quaternion norms and weight row sums.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Maximum non-zero influences per vertex.
pub const MAX_INFLUENCES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// `None` only for the root.
    pub parent: Option<usize>,
    /// Transform from this joint's frame to its parent's frame in the rest pose.
    pub rest_local: Rigid,
}

/// Joint hierarchy in topological order, root first.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        if joints[0].parent.is_some() {
            return Err(Error::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (i, j) in joints.iter().enumerate().skip(1) {
            match j.parent {
                None => {
                    return Err(Error::InvalidSkeleton(alloc::format!(
                        "joint {i} ({}) is a second root",
                        j.name
                    )))
                }
                Some(p) if p >= i => {
                    return Err(Error::InvalidSkeleton(alloc::format!(
                        "joint {i} has parent {p}, parents must precede children"
                    )))
                }
                _ => {}
            }
            if !j.rest_local.rotation.is_unit(UNIT_TOLERANCE) {
                return Err(Error::NonUnitQuaternion {
                    joint: i,
                    norm: j.rest_local.rotation.norm(),
                });
            }
        }
        Ok(Self { joints })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Global rest transforms, `G_rest`.
    pub fn rest_globals(&self) -> Vec<Rigid> {
        let mut out: Vec<Rigid> = Vec::with_capacity(self.len());
        for j in &self.joints {
            let g = match j.parent {
                Some(p) => out[p] * j.rest_local,
                None => j.rest_local,
            };
            out.push(g);
        }
        out
    }

    pub fn rest_positions(&self) -> Vec<Vec3> {
        self.rest_globals().iter().map(|g| g.translation).collect()
    }

    /// Same hierarchy and rest orientations, joints moved to `positions`
    /// (given in model space).
    pub fn with_rest_positions(&self, positions: &[Vec3]) -> Result<Skeleton> {
        if positions.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: positions.len(),
            });
        }
        let globals = self.rest_globals();
        let joints = self
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let translation = match j.parent {
                    Some(p) => globals[p]
                        .rotation
                        .conjugate()
                        .rotate(positions[i] - positions[p]),
                    None => positions[i],
                };
                Joint {
                    name: j.name.clone(),
                    parent: j.parent,
                    rest_local: Rigid::new(j.rest_local.rotation, translation),
                }
            })
            .collect();
        Ok(Skeleton { joints })
    }
}

/// Dense `n_vertices × n_joints` skinning weight matrix `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinningWeights {
    n_vertices: usize,
    n_joints: usize,
    data: Vec<f64>,
}

impl SkinningWeights {
    pub fn from_dense(n_vertices: usize, n_joints: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_vertices * n_joints {
            return Err(Error::DimensionMismatch {
                expected: n_vertices * n_joints,
                got: data.len(),
            });
        }
        let w = Self {
            n_vertices,
            n_joints,
            data,
        };
        w.validate()?;
        Ok(w)
    }

    /// Builds weights from per-vertex `(joint, weight)` lists.
    pub fn from_sparse_rows(n_joints: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut data = vec![0.0; rows.len() * n_joints];
        for (v, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                if j >= n_joints {
                    return Err(Error::InvalidWeights(alloc::format!(
                        "vertex {v} references joint {j} of {n_joints}"
                    )));
                }
                data[v * n_joints + j] += w;
            }
        }
        Self::from_dense(rows.len(), n_joints, data)
    }

    fn validate(&self) -> Result<()> {
        for v in 0..self.n_vertices {
            let row = self.row(v);
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidWeights(alloc::format!(
                    "vertex {v} has a negative or non-finite weight"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidWeights(alloc::format!(
                    "vertex {v} weights sum to {sum}"
                )));
            }
            let nonzero = row.iter().filter(|w| **w > 0.0).count();
            if nonzero > MAX_INFLUENCES {
                return Err(Error::InvalidWeights(alloc::format!(
                    "vertex {v} has {nonzero} influences (max {MAX_INFLUENCES})"
                )));
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.n_joints..(v + 1) * self.n_joints]
    }

    /// Non-zero `(joint, weight)` pairs of a vertex.
    pub fn influences(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(v)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, w)| (j, *w))
    }
}

/// For each joint, the vertices whose centroid is the joint's rest position.
/// Lets a reshaped mesh carry a matching skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRegressor {
    pub groups: Vec<Vec<u32>>,
}

impl JointRegressor {
    pub fn regress(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        self.groups
            .iter()
            .map(|g| {
                let mut acc = Vec3::ZERO;
                for &i in g {
                    acc += vertices[i as usize];
                }
                acc * (1.0 / g.len() as f64)
            })
            .collect()
    }
}

/// Rest-pose mesh with its skeleton and skinning weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RiggedMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    skeleton: Skeleton,
    weights: SkinningWeights,
    regressor: Option<JointRegressor>,
}

impl RiggedMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        skeleton: Skeleton,
        weights: SkinningWeights,
        regressor: Option<JointRegressor>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(alloc::format!("vertex {i} is not finite")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= nv) {
                return Err(Error::InvalidMesh(alloc::format!(
                    "face {fi} references a vertex ≥ {nv}"
                )));
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            if (b - a).cross(c - a).norm() <= 1e-14 {
                return Err(Error::InvalidMesh(alloc::format!("face {fi} has zero area")));
            }
        }
        if weights.n_vertices() != nv {
            return Err(Error::InvalidWeights(alloc::format!(
                "{} weight rows for {nv} vertices",
                weights.n_vertices()
            )));
        }
        if weights.n_joints() != skeleton.len() {
            return Err(Error::InvalidWeights(alloc::format!(
                "{} weight columns for {} joints",
                weights.n_joints(),
                skeleton.len()
            )));
        }
        if let Some(r) = &regressor {
            if r.groups.len() != skeleton.len()
                || r.groups
                    .iter()
                    .any(|g| g.is_empty() || g.iter().any(|&i| i as usize >= nv))
            {
                return Err(Error::InvalidMesh("invalid joint regressor".into()));
            }
        }
        Ok(Self {
            vertices,
            faces,
            skeleton,
            weights,
            regressor,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn weights(&self) -> &SkinningWeights {
        &self.weights
    }

    pub fn regressor(&self) -> Option<&JointRegressor> {
        self.regressor.as_ref()
    }

    /// Same topology and weights with new rest vertices. When the mesh has a
    /// joint regressor the skeleton follows the new shape.
    pub fn reshaped(&self, vertices: Vec<Vec3>) -> Result<RiggedMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::TopologyMismatch(alloc::format!(
                "{} vertices, expected {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        let skeleton = match &self.regressor {
            Some(r) => self.skeleton.with_rest_positions(&r.regress(&vertices))?,
            None => self.skeleton.clone(),
        };
        RiggedMesh::new(
            vertices,
            self.faces.clone(),
            skeleton,
            self.weights.clone(),
            self.regressor.clone(),
        )
    }

    pub fn flattened_vertices(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| v.to_array()).collect()
    }
}

/// Pose of the whole skeleton: `θ_pose`, `θ_root` and `d_root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    pub joint_rotations: Vec<Quat>,
    pub root_rotation: Quat,
    /// Distance of the root in front of the camera, metres.
    pub root_depth: f64,
}

impl PoseParams {
    pub fn identity(n_joints: usize) -> Self {
        Self {
            joint_rotations: vec![Quat::IDENTITY; n_joints],
            root_rotation: Quat::IDENTITY,
            root_depth: 0.0,
        }
    }
}

/// Output of forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub globals: Vec<Rigid>,
    pub positions: Vec<Vec3>,
}

/// World placement of the root: translated to `(0, 0, −d_root)` and rotated
/// by `θ_root`.
pub fn root_placement(pose: &PoseParams) -> Rigid {
    Rigid::new(pose.root_rotation, Vec3::new(0.0, 0.0, -pose.root_depth))
}

/// Composes joint transforms down the hierarchy:
/// `G_j = G_parent(j) ∘ rest_local_j ∘ R_j`, with the root additionally
/// placed by [`root_placement`].
pub fn forward_kinematics(skeleton: &Skeleton, pose: &PoseParams) -> Result<Kinematics> {
    if pose.joint_rotations.len() != skeleton.len() {
        return Err(Error::DimensionMismatch {
            expected: skeleton.len(),
            got: pose.joint_rotations.len(),
        });
    }
    for (joint, q) in pose.joint_rotations.iter().enumerate() {
        if !q.is_unit(UNIT_TOLERANCE) {
            return Err(Error::NonUnitQuaternion {
                joint,
                norm: q.norm(),
            });
        }
    }
    if !pose.root_rotation.is_unit(UNIT_TOLERANCE) {
        return Err(Error::NonUnitQuaternion {
            joint: 0,
            norm: pose.root_rotation.norm(),
        });
    }

    let root = root_placement(pose);
    let mut globals: Vec<Rigid> = Vec::with_capacity(skeleton.len());
    for (j, joint) in skeleton.joints().iter().enumerate() {
        let local = joint.rest_local * Rigid::from_rotation(pose.joint_rotations[j]);
        let g = match joint.parent {
            Some(p) => globals[p] * local,
            None => root * local,
        };
        globals.push(g);
    }
    let positions = globals.iter().map(|g| g.translation).collect();
    Ok(Kinematics { globals, positions })
}

/// Linear blend skinning:
/// `v' = Σ_j W[v][j] · (G_j ∘ G_rest,j⁻¹)(v)`.
pub fn apply_lbs(mesh: &RiggedMesh, transforms: &[Rigid]) -> Result<Vec<Vec3>> {
    let skel = mesh.skeleton();
    if transforms.len() != skel.len() {
        return Err(Error::DimensionMismatch {
            expected: skel.len(),
            got: transforms.len(),
        });
    }
    let skinning: Vec<Affine> = transforms
        .iter()
        .zip(skel.rest_globals())
        .map(|(g, rest)| (*g * rest.inverse()).to_affine())
        .collect();
    let weights = mesh.weights();
    Ok(mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let mut acc = Vec3::ZERO;
            for (j, w) in weights.influences(v) {
                acc += skinning[j].apply(p) * w;
            }
            acc
        })
        .collect())
}

/// Per-vertex dominant joint and per-face majority label.
#[derive(Debug, Clone, PartialEq)]
pub struct PartLabels {
    pub vertex: Vec<u16>,
    pub face: Vec<u16>,
}

/// Vertex label = argmax of its weight row (lowest joint on ties); face label
/// = most frequent vertex label (lowest on ties).
pub fn part_labels(weights: &SkinningWeights, faces: &[[u32; 3]]) -> PartLabels {
    let vertex: Vec<u16> = (0..weights.n_vertices())
        .map(|v| {
            let mut best = 0usize;
            let row = weights.row(v);
            for (j, &w) in row.iter().enumerate() {
                if w > row[best] {
                    best = j;
                }
            }
            best as u16
        })
        .collect();
    let face = faces
        .iter()
        .map(|f| majority_label(f.map(|i| vertex[i as usize])))
        .collect();
    PartLabels { vertex, face }
}

fn majority_label(labels: [u16; 3]) -> u16 {
    let [a, b, c] = labels;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        a.min(b).min(c)
    }
}

/// Fits a shape PCA over mesh variants sharing one topology.
pub fn synthesize_shape_pca(meshes: &[RiggedMesh]) -> Result<PcaModel> {
    let first = meshes
        .first()
        .ok_or(Error::TooFewSamples { required: 2, got: 0 })?;
    for (i, m) in meshes.iter().enumerate().skip(1) {
        if m.vertices().len() != first.vertices().len() || m.faces() != first.faces() {
            return Err(Error::TopologyMismatch(alloc::format!(
                "mesh {i} does not share the topology of mesh 0"
            )));
        }
    }
    let columns: Vec<Vec<f64>> = meshes.iter().map(|m| m.flattened_vertices()).collect();
    let layout = FeatureLayout::Mesh {
        vertices: first.vertices().len(),
    };
    fit_pca(&SampleMatrix::from_columns(layout, &columns)?)
}

/// Unflattens an `x y z x y z …` vector.
pub fn unflatten_vertices(values: &[f64]) -> Vec<Vec3> {
    values
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}
