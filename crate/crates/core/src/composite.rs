//! Background compositing, 2D repositioning and the per-sample generation
//! pipeline.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{mask_bbox, Image, Rgb};
use crate::linalg::{Quat, Vec3};
use crate::mesh::{
    apply_lbs, forward_kinematics, part_labels, sample_root_rotation, unflatten_vertices, PoseLibrary,
    PoseParams, RiggedMesh, RootRotation, UprightBounds,
};
use crate::pca::{
    sample_coefficients, synthesize, synthesize_unclamped, Coefficients, FeatureLayout, PcaModel,
    TextureTensor,
};
use crate::placement::{
    clamp_translation, sample_center, sample_root_depth, BBoxStats, DepthBounds, PlacementSample,
};
use crate::render::{
    render, sample_lighting, Camera, Joint2d, Lighting, LightingRanges, RenderOutput, Scene,
};

/// Attempts per sample before an empty render becomes an error.
pub const MAX_ATTEMPTS: u32 = 10;

/// `out = bg·(1−mask) + rgb`, per pixel.
pub fn composite(rendered: &RenderOutput, background: &Image<Rgb>) -> Result<Image<Rgb>> {
    rendered.rgb.check_shape(background)?;
    let data = rendered
        .rgb
        .data()
        .iter()
        .zip(rendered.mask.data())
        .zip(background.data())
        .map(|((fg, &m), bg)| {
            let keep = if m { 0.0 } else { 1.0 };
            [0, 1, 2].map(|c| bg[c] * keep + fg[c])
        })
        .collect();
    Image::from_vec(background.width(), background.height(), data)
}

fn shift_image<T: Clone>(img: &Image<T>, dx: i64, dy: i64, fill: T) -> Image<T> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    Image::from_fn(img.width(), img.height(), |x, y| {
        let sx = x as i64 - dx;
        let sy = y as i64 - dy;
        if sx >= 0 && sy >= 0 && sx < w && sy < h {
            img.get(sx as usize, sy as usize).clone()
        } else {
            fill.clone()
        }
    })
}

/// Translates every image-plane channel by `(dx, dy)` pixels. Vacated pixels
/// become background; content leaving the frame is dropped. Joints move by
/// the same offset and the box is recomputed from the shifted mask.
pub fn apply_g(rendered: &RenderOutput, dx: i64, dy: i64) -> RenderOutput {
    let (w, h) = (rendered.width(), rendered.height());
    let mask = shift_image(&rendered.mask, dx, dy, false);
    let joints_2d = rendered
        .joints_2d
        .iter()
        .map(|j| Joint2d::at(j.position.map(|p| [p[0] + dx as f64, p[1] + dy as f64]), w, h))
        .collect();
    RenderOutput {
        rgb: shift_image(&rendered.rgb, dx, dy, [0.0; 3]),
        part_map: shift_image(&rendered.part_map, dx, dy, None),
        depth: shift_image(&rendered.depth, dx, dy, f64::INFINITY),
        bbox: mask_bbox(&mask),
        mask,
        joints_2d,
    }
}

/// A background image and its identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub id: String,
    pub image: Image<Rgb>,
}

/// Everything the generator draws from.
#[derive(Debug, Clone)]
pub struct Assets {
    mesh: RiggedMesh,
    face_labels: Vec<u16>,
    shape_model: Option<PcaModel>,
    texture_model: PcaModel,
    poses: PoseLibrary,
    stats: BBoxStats,
    backgrounds: Vec<Background>,
}

impl Assets {
    /// Validates that the pieces fit together. Without a shape model every
    /// sample uses the canonical mesh.
    pub fn new(
        mesh: RiggedMesh,
        shape_model: Option<PcaModel>,
        texture_model: PcaModel,
        poses: PoseLibrary,
        stats: BBoxStats,
        backgrounds: Vec<Background>,
    ) -> Result<Self> {
        if let Some(m) = &shape_model {
            let expected = FeatureLayout::Mesh {
                vertices: mesh.vertices().len(),
            };
            if m.layout() != expected {
                return Err(Error::TopologyMismatch(alloc::format!(
                    "shape model layout {:?} does not match mesh with {} vertices",
                    m.layout(),
                    mesh.vertices().len()
                )));
            }
        }
        match texture_model.layout() {
            FeatureLayout::Texture { faces, .. } if faces == mesh.faces().len() => {}
            FeatureLayout::Texture { faces, .. } => {
                return Err(Error::TextureFaceMismatch {
                    texture: faces,
                    mesh: mesh.faces().len(),
                })
            }
            other => {
                return Err(Error::InvalidConfig(alloc::format!(
                    "texture model has layout {other:?}"
                )))
            }
        }
        if poses.n_joints() != mesh.skeleton().len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.skeleton().len(),
                got: poses.n_joints(),
            });
        }
        if stats.is_empty() {
            return Err(Error::EmptyStats);
        }
        if backgrounds.is_empty() {
            return Err(Error::Asset("no background images".into()));
        }
        let face_labels = part_labels(mesh.weights(), mesh.faces()).face;
        Ok(Self {
            mesh,
            face_labels,
            shape_model,
            texture_model,
            poses,
            stats,
            backgrounds,
        })
    }

    pub fn mesh(&self) -> &RiggedMesh {
        &self.mesh
    }

    pub fn face_labels(&self) -> &[u16] {
        &self.face_labels
    }

    pub fn shape_model(&self) -> Option<&PcaModel> {
        self.shape_model.as_ref()
    }

    pub fn texture_model(&self) -> &PcaModel {
        &self.texture_model
    }

    pub fn poses(&self) -> &PoseLibrary {
        &self.poses
    }

    pub fn stats(&self) -> &BBoxStats {
        &self.stats
    }

    pub fn backgrounds(&self) -> &[Background] {
        &self.backgrounds
    }
}

/// Sampling parameters that are not assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub camera: Camera,
    pub depth: DepthBounds,
    pub lighting: LightingRanges,
    pub upright: UprightBounds,
    pub shape_scale: f64,
    pub texture_scale: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            camera: Camera::default(),
            depth: DepthBounds::default(),
            lighting: LightingRanges::default(),
            upright: UprightBounds::default(),
            shape_scale: 1.0,
            texture_scale: 1.0,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.depth.validate()?;
        self.lighting.validate()?;
        for (name, s) in [
            ("shape_scale", self.shape_scale),
            ("texture_scale", self.texture_scale),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// RNG for one sample: the seed picks the key, the sample index the stream.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Pose actually used for a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub name: String,
    pub joint_rotations: Vec<Quat>,
    pub root: RootRotation,
    pub root_rotation: Quat,
    pub root_depth: f64,
}

/// One generated sample. `render` holds the repositioned channels; `rgb` is
/// the composited image.
#[derive(Debug, Clone)]
pub struct DataSample {
    pub index: u64,
    pub rgb: Image<Rgb>,
    pub render: RenderOutput,
    pub joints_3d: Vec<Vec3>,
    pub pose: PoseRecord,
    pub shape_coefficients: Coefficients,
    pub texture_coefficients: Coefficients,
    pub background: usize,
    pub background_id: String,
    pub placement: PlacementSample,
    pub lighting: Lighting,
    pub attempts: u32,
}

/// Generates sample `index` of the dataset seeded by `seed`.
pub fn generate_sample(
    params: &GenerationParams,
    assets: &Assets,
    seed: u64,
    index: u64,
) -> Result<DataSample> {
    let mut rng = sample_rng(seed, index);
    generate_with_rng(params, assets, &mut rng, index)
}

/// Pipeline body shared by [`generate_sample`]; all randomness comes from
/// `rng`, consumed in a fixed order.
pub fn generate_with_rng<R: Rng + ?Sized>(
    params: &GenerationParams,
    assets: &Assets,
    rng: &mut R,
    index: u64,
) -> Result<DataSample> {
    params.validate()?;
    let camera = &params.camera;
    let (w, h) = (camera.width, camera.height);
    if let Some(bg) = assets
        .backgrounds
        .iter()
        .find(|b| b.image.width() != w || b.image.height() != h)
    {
        return Err(Error::ShapeMismatch {
            left_w: w,
            left_h: h,
            right_w: bg.image.width(),
            right_h: bg.image.height(),
        });
    }

    for attempt in 1..=MAX_ATTEMPTS {
        let shape_coefficients = match &assets.shape_model {
            Some(m) => sample_coefficients(m, rng, params.shape_scale),
            None => Coefficients::zeros(0),
        };
        let texture_coefficients = sample_coefficients(&assets.texture_model, rng, params.texture_scale);

        let mesh = match &assets.shape_model {
            Some(m) => {
                let flat = synthesize_unclamped(m, &shape_coefficients)?;
                assets.mesh.reshaped(unflatten_vertices(&flat))?
            }
            None => assets.mesh.clone(),
        };
        let texture = TextureTensor::from_model_output(
            assets.texture_model.layout(),
            synthesize(&assets.texture_model, &texture_coefficients)?,
        )?;

        let named = assets.poses.sample(rng);
        let root = sample_root_rotation(rng, &params.upright);
        let d_root = sample_root_depth(&assets.stats, &params.depth, rng);
        let pose = PoseParams {
            joint_rotations: named.rotations.clone(),
            root_rotation: root.to_quat(),
            root_depth: d_root,
        };

        let kin = forward_kinematics(mesh.skeleton(), &pose)?;
        let posed = apply_lbs(&mesh, &kin.globals)?;
        let lighting = sample_lighting(rng, &params.lighting)?;
        let scene = Scene {
            vertices: &posed,
            faces: mesh.faces(),
            face_labels: Some(&assets.face_labels),
            joints: &kin.positions,
        };
        let rendered = render(&scene, &texture, camera, &lighting)?;
        let Some(bbox) = rendered.bbox else {
            continue;
        };

        let size = bbox.area() as f64 / (w * h) as f64;
        let cp = sample_center(&assets.stats, size, rng)?;
        let (dx, dy) = clamp_translation(bbox, cp, (w, h))?;
        let moved = apply_g(&rendered, dx, dy);

        let background = rng.random_range(0..assets.backgrounds.len());
        let rgb = composite(&moved, &assets.backgrounds[background].image)?;

        return Ok(DataSample {
            index,
            rgb,
            render: moved,
            joints_3d: kin.positions,
            pose: PoseRecord {
                name: named.name.clone(),
                joint_rotations: pose.joint_rotations,
                root,
                root_rotation: pose.root_rotation,
                root_depth: d_root,
            },
            shape_coefficients,
            texture_coefficients,
            background,
            background_id: assets.backgrounds[background].id.clone(),
            placement: PlacementSample {
                d_root,
                cp,
                translation: [dx, dy],
            },
            lighting,
            attempts: attempt,
        });
    }
    Err(Error::EmptyRender(MAX_ATTEMPTS as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::PixelRect;

    fn square_render() -> RenderOutput {
        let mut r = RenderOutput::empty(8, 6);
        for y in 1..3 {
            for x in 2..5 {
                *r.mask.get_mut(x, y) = true;
                *r.rgb.get_mut(x, y) = [0.2, 0.4, 0.6];
                *r.part_map.get_mut(x, y) = Some(3);
                *r.depth.get_mut(x, y) = 2.0;
            }
        }
        r.bbox = mask_bbox(&r.mask);
        r.joints_2d = alloc::vec![Joint2d::at(Some([3.0, 2.0]), 8, 6)];
        r
    }

    #[test]
    fn composite_extremes() {
        let bg = Image::from_fn(8, 6, |x, y| [x as f64 / 8.0, y as f64 / 6.0, 0.5]);
        let empty = RenderOutput::empty(8, 6);
        assert_eq!(composite(&empty, &bg).unwrap(), bg);

        let mut full = RenderOutput::empty(8, 6);
        full.mask = Image::filled(8, 6, true);
        full.rgb = Image::filled(8, 6, [0.1, 0.2, 0.3]);
        assert_eq!(composite(&full, &bg).unwrap(), full.rgb);

        let small = Image::filled(4, 4, [0.0; 3]);
        assert!(matches!(
            composite(&full, &small),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn shift_round_trip() {
        let r = square_render();
        assert_eq!(apply_g(&r, 0, 0), r);
        let moved = apply_g(&r, 2, 3);
        assert_eq!(moved.bbox, Some(PixelRect::new(4, 4, 7, 6)));
        assert_eq!(moved.joints_2d[0].position, Some([5.0, 5.0]));
        assert_eq!(*moved.part_map.get(4, 4), Some(3));
        assert!(moved.consistency_violation().is_none());
        assert_eq!(apply_g(&moved, -2, -3), r);
    }

    #[test]
    fn shift_off_frame_drops_content() {
        let r = square_render();
        let moved = apply_g(&r, -4, 0);
        let count = moved.mask.data().iter().filter(|m| **m).count();
        assert_eq!(count, 2);
        assert!(!moved.joints_2d[0].visible);
        assert_eq!(moved.bbox, Some(PixelRect::new(0, 1, 1, 3)));
    }

    #[test]
    fn stream_per_index() {
        let a: u64 = sample_rng(7, 0).random();
        let b: u64 = sample_rng(7, 0).random();
        let c: u64 = sample_rng(7, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
