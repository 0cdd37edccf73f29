//! Binary PCA model files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      b"SCPC"
//! version    u32 (1)
//! layout     u32 (0 = texture, 1 = mesh)
//! dim_a      u32 (faces, or vertices)
//! dim_b      u32 (texel resolution, or 0)
//! n_features u64
//! n_comp     u32
//! mean       f32 × n_features
//! basis      f32 × n_features × n_comp, one component after another
//! variances  f32 × n_comp
//! ```

use std::fs;
use std::path::Path;

use caninesynth_core::pca::{FeatureLayout, PcaModel};
use serde::Serialize;

use crate::error::{format_err, IoContext, Result};
use crate::formats::{write_atomic, write_json};

pub const MAGIC: &[u8; 4] = b"SCPC";
pub const VERSION: u32 = 1;
/// Orthonormality accepted on load. Values are stored as `f32`, so the basis
/// is re-orthonormalized in `f64` afterwards.
pub const LOAD_ORTHO_TOLERANCE: f64 = 1e-4;

pub fn encode(model: &PcaModel) -> Vec<u8> {
    let n = model.n_features();
    let k = model.n_components();
    let mut out = Vec::with_capacity(32 + 4 * (n * (k + 1) + k));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, a, b) = match model.layout() {
        FeatureLayout::Texture { faces, resolution } => (0u32, faces as u32, resolution as u32),
        FeatureLayout::Mesh { vertices } => (1u32, vertices as u32, 0u32),
    };
    for v in [tag, a, b] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    for v in model.mean().iter().chain(model.basis()).chain(model.variances()) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(self.path, "truncated PCA file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| format_err(self.path, "size overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<PcaModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != MAGIC {
        return Err(format_err(path, "not a PCA model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err(
            path,
            format!("unsupported PCA file version {version}"),
        ));
    }
    let (tag, a, b) = (r.u32()?, r.u32()? as usize, r.u32()? as usize);
    let layout = match tag {
        0 => FeatureLayout::Texture {
            faces: a,
            resolution: b,
        },
        1 => FeatureLayout::Mesh { vertices: a },
        t => return Err(format_err(path, format!("unknown layout tag {t}"))),
    };
    let n = r.u64()? as usize;
    if n != layout.n_features() {
        return Err(format_err(
            path,
            format!("{n} features recorded, layout implies {}", layout.n_features()),
        ));
    }
    let k = r.u32()? as usize;
    let mean = r.f32s(n)?;
    let basis = r.f32s(n * k)?;
    let variances = r.f32s(k)?;
    if r.pos != bytes.len() {
        return Err(format_err(path, "trailing bytes after PCA model"));
    }
    let mut model = PcaModel::from_parts(layout, mean, basis, variances, LOAD_ORTHO_TOLERANCE)?;
    model.reorthonormalize();
    Ok(model)
}

pub fn save(model: &PcaModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn load(path: &Path) -> Result<PcaModel> {
    let bytes = fs::read(path).at(path)?;
    decode(&bytes, path)
}

#[derive(Serialize)]
struct JsonModel<'a> {
    layout: FeatureLayout,
    n_features: usize,
    n_components: usize,
    mean: &'a [f64],
    variances: &'a [f64],
    components: Vec<&'a [f64]>,
}

/// Human-readable dump of a model.
pub fn export_json(model: &PcaModel, path: &Path) -> Result<()> {
    write_json(
        path,
        &JsonModel {
            layout: model.layout(),
            n_features: model.n_features(),
            n_components: model.n_components(),
            mean: model.mean(),
            variances: model.variances(),
            components: (0..model.n_components()).map(|k| model.component(k)).collect(),
        },
    )
}
