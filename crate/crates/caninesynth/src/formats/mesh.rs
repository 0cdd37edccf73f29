//! Wavefront OBJ geometry plus a JSON rig sidecar holding the skeleton,
//! sparse skinning weights and the optional joint regressor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use caninesynth_core::linalg::Vec3;
use caninesynth_core::mesh::{Joint, JointRegressor, RiggedMesh, Skeleton, SkinningWeights};
use serde::{Deserialize, Serialize};

use crate::error::{format_err, IoContext, Result};
use crate::formats::{read_json, write_atomic, write_json};

pub const RIG_SCHEMA_VERSION: u32 = 1;

/// Serializes vertices and faces; only `v` and `f` records are written.
pub fn encode_obj(vertices: &[Vec3], faces: &[[u32; 3]]) -> String {
    let mut s = String::with_capacity(32 * (vertices.len() + faces.len()));
    for v in vertices {
        // `{:?}` prints the shortest string that round-trips exactly.
        writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for f in faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

/// Reads `v` and `f` records. Faces with more than three corners are fan
/// triangulated; `v/vt/vn` corner syntax and negative indices are accepted.
/// Every other record is ignored.
pub fn decode_obj(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |m: &str| format_err(path, format!("line {}: {m}", lineno + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let xyz: Vec<f64> = parts
                    .take(3)
                    .map(|p| p.parse::<f64>().map_err(|_| err("bad vertex coordinate")))
                    .collect::<Result<_>>()?;
                if xyz.len() != 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = parts
                    .map(|p| {
                        let first = p.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                        let n = vertices.len() as i64;
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if resolved < 0 || resolved >= n {
                            return Err(err("face index out of range"));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three corners"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(format_err(path, "OBJ has no vertices or faces"));
    }
    Ok((vertices, faces))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub schema_version: u32,
    pub joints: Vec<Joint>,
    /// Per-vertex `(joint, weight)` pairs; zero weights omitted.
    pub weights: Vec<Vec<(usize, f64)>>,
    #[serde(default)]
    pub regressor: Option<JointRegressor>,
}

impl RigFile {
    pub fn of(mesh: &RiggedMesh) -> Self {
        let w = mesh.weights();
        Self {
            schema_version: RIG_SCHEMA_VERSION,
            joints: mesh.skeleton().joints().to_vec(),
            weights: (0..w.n_vertices()).map(|v| w.influences(v).collect()).collect(),
            regressor: mesh.regressor().cloned(),
        }
    }
}

pub fn save_mesh(mesh: &RiggedMesh, obj: &Path, rig: &Path) -> Result<()> {
    write_atomic(obj, encode_obj(mesh.vertices(), mesh.faces()).as_bytes())?;
    write_json(rig, &RigFile::of(mesh))
}

pub fn load_mesh(obj: &Path, rig: &Path) -> Result<RiggedMesh> {
    let text = fs::read_to_string(obj).at(obj)?;
    let (vertices, faces) = decode_obj(&text, obj)?;
    let rig_file: RigFile = read_json(rig)?;
    if rig_file.schema_version != RIG_SCHEMA_VERSION {
        return Err(format_err(
            rig,
            format!("unsupported rig schema {}", rig_file.schema_version),
        ));
    }
    if rig_file.weights.len() != vertices.len() {
        return Err(format_err(
            rig,
            format!(
                "{} weight rows for {} OBJ vertices",
                rig_file.weights.len(),
                vertices.len()
            ),
        ));
    }
    let skeleton = Skeleton::new(rig_file.joints)?;
    let weights = SkinningWeights::from_sparse_rows(skeleton.len(), &rig_file.weights)?;
    Ok(RiggedMesh::new(
        vertices,
        faces,
        skeleton,
        weights,
        rig_file.regressor,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obj_round_trip_is_exact() {
        let v = vec![
            Vec3::new(0.1, -2.5e-7, 3.0),
            Vec3::new(1.0 / 3.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let f = vec![[0u32, 1, 2]];
        let (v2, f2) = decode_obj(&encode_obj(&v, &f), Path::new("a.obj")).unwrap();
        assert_eq!(v, v2);
        assert_eq!(f, f2);
    }

    #[test]
    fn obj_quads_and_slashes() {
        let text = "# c\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n";
        let (v, f) = decode_obj(text, Path::new("q.obj")).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(decode_obj("v 0 0 0\nf 1 2 3\n", Path::new("b.obj")).is_err());
        assert!(decode_obj("v 0 x 0\n", Path::new("b.obj")).is_err());
    }
}
