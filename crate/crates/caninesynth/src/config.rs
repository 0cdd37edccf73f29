//! Dataset generation configuration and asset pack loading.
//!
//! Configs are TOML or JSON (chosen by extension). Every field has a default,
//! so an empty file generates from procedural assets.

use std::fs;
use std::path::{Path, PathBuf};

use caninesynth_core::assets::{procedural_assets, procedural_backgrounds, ProceduralAssetConfig};
use caninesynth_core::composite::{Assets, GenerationParams};
use caninesynth_core::mesh::{PoseLibrary, UprightBounds};
use caninesynth_core::placement::{BBoxStats, DepthBounds};
use caninesynth_core::render::{Camera, LightingRanges, DEFAULT_FOCAL, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{format_err, Error, IoContext, Result};
use crate::formats::images::{encode_rgb, load_backgrounds};
use crate::formats::{mesh, pca, poses, stats, write_atomic};

pub const MESH_FILE: &str = "mesh.obj";
pub const RIG_FILE: &str = "rig.json";
pub const SHAPE_PCA_FILE: &str = "shape_pca.scpc";
pub const TEXTURE_PCA_FILE: &str = "texture_pca.scpc";
pub const POSES_FILE: &str = "poses.json";
pub const STATS_FILE: &str = "stats.csv";
pub const BACKGROUNDS_DIR: &str = "backgrounds";

/// Where assets come from. With nothing set the whole pack is procedural.
/// `dir` points at a pack written by [`save_asset_pack`]; individual paths
/// override files inside it. A pack needs at least the mesh, rig and texture
/// model; a missing shape model disables shape variation, and missing poses,
/// statistics or backgrounds fall back to the procedural ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetPaths {
    pub dir: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub rig: Option<PathBuf>,
    pub shape_pca: Option<PathBuf>,
    pub texture_pca: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub backgrounds: Option<PathBuf>,
}

impl AssetPaths {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.dir.as_ref().map(|d| d.join(name)).filter(|p| p.exists()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub count: u64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub depth: DepthBounds,
    pub lighting: LightingRanges,
    pub upright: UprightBounds,
    pub shape_scale: f64,
    pub texture_scale: f64,
    /// Also write per-pixel depth as float maps.
    pub write_depth: bool,
    pub assets: AssetPaths,
    pub procedural: ProceduralAssetConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            focal: DEFAULT_FOCAL,
            depth: DepthBounds::default(),
            lighting: LightingRanges::default(),
            upright: UprightBounds::default(),
            shape_scale: 1.0,
            texture_scale: 1.0,
            write_depth: false,
            assets: AssetPaths::default(),
            procedural: ProceduralAssetConfig::default(),
        }
    }
}

impl GenerationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
        }
    }

    pub fn params(&self) -> Result<GenerationParams> {
        let params = GenerationParams {
            camera: Camera::centered(self.width, self.height, self.focal),
            depth: self.depth,
            lighting: self.lighting,
            upright: self.upright,
            shape_scale: self.shape_scale,
            texture_scale: self.texture_scale,
        };
        params.validate()?;
        Ok(params)
    }

    /// Procedural settings with the frame size forced to the output size.
    fn procedural_config(&self) -> ProceduralAssetConfig {
        ProceduralAssetConfig {
            width: self.width,
            height: self.height,
            ..self.procedural
        }
    }

    pub fn build_assets(&self) -> Result<Assets> {
        let proc_cfg = self.procedural_config();
        let paths = &self.assets;
        if paths.is_empty() {
            return Ok(procedural_assets(&proc_cfg)?);
        }
        let (Some(mesh_path), Some(rig_path), Some(texture_path)) = (
            paths.resolve(&paths.mesh, MESH_FILE),
            paths.resolve(&paths.rig, RIG_FILE),
            paths.resolve(&paths.texture_pca, TEXTURE_PCA_FILE),
        ) else {
            return Err(Error::Config(
                "an asset pack needs a mesh, a rig and a texture model".into(),
            ));
        };
        let mesh = mesh::load_mesh(&mesh_path, &rig_path)?;
        let texture_model = pca::load(&texture_path)?;
        let shape_model = paths
            .resolve(&paths.shape_pca, SHAPE_PCA_FILE)
            .map(|p| pca::load(&p))
            .transpose()?;
        let pose_library = match paths.resolve(&paths.poses, POSES_FILE) {
            Some(p) => poses::load_poses(&p, mesh.skeleton())?,
            None => PoseLibrary::procedural(mesh.skeleton())?,
        };
        let bbox_stats = match paths.resolve(&paths.stats, STATS_FILE) {
            Some(p) => stats::load_stats(&p)?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(proc_cfg.seed.wrapping_add(1));
                BBoxStats::synthetic(&mut rng, proc_cfg.stats_entries)?
            }
        };
        let backgrounds = match paths.resolve(&paths.backgrounds, BACKGROUNDS_DIR) {
            Some(dir) => load_backgrounds(&dir, self.width, self.height)?,
            None => procedural_backgrounds(
                proc_cfg.backgrounds,
                self.width,
                self.height,
                proc_cfg.seed.wrapping_add(2),
            ),
        };
        Ok(Assets::new(
            mesh,
            shape_model,
            texture_model,
            pose_library,
            bbox_stats,
            backgrounds,
        )?)
    }
}

/// Writes every asset in the layout [`AssetPaths::dir`] expects.
pub fn save_asset_pack(assets: &Assets, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    mesh::save_mesh(assets.mesh(), &dir.join(MESH_FILE), &dir.join(RIG_FILE))?;
    if let Some(m) = assets.shape_model() {
        pca::save(m, &dir.join(SHAPE_PCA_FILE))?;
    }
    pca::save(assets.texture_model(), &dir.join(TEXTURE_PCA_FILE))?;
    poses::save_poses(assets.poses(), assets.mesh().skeleton(), &dir.join(POSES_FILE))?;
    stats::save_stats(assets.stats(), &dir.join(STATS_FILE))?;
    let bg_dir = dir.join(BACKGROUNDS_DIR);
    for bg in assets.backgrounds() {
        write_atomic(&bg_dir.join(format!("{}.png", bg.id)), &encode_rgb(&bg.image))?;
    }
    Ok(())
}
