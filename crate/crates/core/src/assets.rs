//! Procedural stand-ins for every generator asset: shape and texture models
//! fitted to generated dogs, the procedural pose library, synthetic box
//! statistics and synthetic backgrounds.

use alloc::format;
use alloc::vec::Vec;

// Inherent float methods are missing when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{Assets, Background};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mesh::{
    generate_canonical_dog, procedural_textures, shape_variants, synthesize_shape_pca, DogConfig, PoseLibrary,
};
use crate::pca::{fit_pca, SampleMatrix};
use crate::placement::BBoxStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProceduralAssetConfig {
    pub dog: DogConfig,
    /// Shape variants fitted by the shape model; 0 disables shape variation.
    pub shape_variants: usize,
    pub shape_jitter: f64,
    pub textures: usize,
    pub texture_resolution: usize,
    pub stats_entries: usize,
    pub backgrounds: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for ProceduralAssetConfig {
    fn default() -> Self {
        Self {
            dog: DogConfig::default(),
            shape_variants: 8,
            shape_jitter: 0.12,
            textures: 12,
            texture_resolution: 4,
            stats_entries: 2000,
            backgrounds: 8,
            width: crate::render::DEFAULT_WIDTH,
            height: crate::render::DEFAULT_HEIGHT,
            seed: 0,
        }
    }
}

/// Smooth random scenes: a vertical gradient with a horizon band and soft
/// blobs.
pub fn procedural_backgrounds(count: usize, width: usize, height: usize, seed: u64) -> Vec<Background> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let top: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.3..0.9));
            let bottom: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.05..0.6));
            let horizon = rng.random_range(0.3..0.7);
            let blobs: Vec<([f64; 2], f64, [f64; 3])> = (0..6)
                .map(|_| {
                    (
                        [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                        rng.random_range(0.05..0.3),
                        core::array::from_fn(|_| rng.random_range(-0.25..0.25)),
                    )
                })
                .collect();
            let image = Image::from_fn(width, height, |x, y| {
                let u = (x as f64 + 0.5) / width as f64;
                let v = (y as f64 + 0.5) / height as f64;
                let s = 1.0 / (1.0 + ((v - horizon) * 25.0).exp());
                core::array::from_fn(|c| {
                    let mut value = top[c] * s + bottom[c] * (1.0 - s);
                    for (centre, radius, tint) in &blobs {
                        let d2 = (u - centre[0]).powi(2) + (v - centre[1]).powi(2);
                        value += tint[c] * (-d2 / (radius * radius)).exp();
                    }
                    value.clamp(0.0, 1.0)
                })
            });
            Background {
                id: format!("procedural_{i:03}"),
                image,
            }
        })
        .collect()
}

/// Builds a complete asset pack from the procedural generators.
pub fn procedural_assets(config: &ProceduralAssetConfig) -> Result<Assets> {
    if config.textures < 2 {
        return Err(Error::InvalidConfig("need at least two textures".into()));
    }
    let mesh = generate_canonical_dog(&config.dog)?;
    let shape_model = if config.shape_variants >= 2 {
        let variants = shape_variants(
            &config.dog,
            config.shape_variants,
            config.shape_jitter,
            config.seed ^ 0x5eed,
        )?;
        Some(synthesize_shape_pca(&variants)?)
    } else {
        None
    };
    let textures = procedural_textures(&mesh, config.textures, config.texture_resolution, config.seed)?;
    let columns: Vec<&[f64]> = textures.iter().map(|t| t.texels()).collect();
    let texture_model = fit_pca(&SampleMatrix::from_columns(textures[0].layout(), &columns)?)?;
    let poses = PoseLibrary::procedural(mesh.skeleton())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let stats = BBoxStats::synthetic(&mut rng, config.stats_entries)?;
    let backgrounds = procedural_backgrounds(
        config.backgrounds,
        config.width,
        config.height,
        config.seed.wrapping_add(2),
    );
    Assets::new(mesh, shape_model, texture_model, poses, stats, backgrounds)
}
