//! Z-buffered perspective rasterizer.
//!
//! Coverage uses pixel centres with a top-left fill rule, evaluated on
//! vertices snapped to a 1/256 subpixel grid so shared edges are resolved
//! exactly once. Shading is flat per face (two-sided Lambert plus ambient)
//! and colour comes from the per-face texel grid.

// Inherent float methods are missing when std is not linked.
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{mask_bbox, Image, PixelRect, Rgb};
use crate::linalg::{Rigid, Vec3};
use crate::pca::TextureTensor;

pub const DEFAULT_WIDTH: usize = 455;
pub const DEFAULT_HEIGHT: usize = 256;
pub const DEFAULT_FOCAL: f64 = 500.0;

const SUBPIXEL_BITS: u32 = 8;
const SUBPIXEL: f64 = (1 << SUBPIXEL_BITS) as f64;
/// Screen coordinates beyond this many pixels are culled so edge functions
/// stay within `i64`.
const MAX_SCREEN_COORD: f64 = (1u64 << 21) as f64;

/// Pinhole camera looking down `−z` of its own frame, `y` up, image `y` down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal: f64,
    pub principal: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// World-to-camera transform.
    pub extrinsic: Rigid,
    /// Geometry closer than this (metres) is clipped.
    pub near: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera::centered(DEFAULT_WIDTH, DEFAULT_HEIGHT, DEFAULT_FOCAL)
    }
}

impl Camera {
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            focal,
            principal: [width as f64 * 0.5, height as f64 * 0.5],
            width,
            height,
            extrinsic: Rigid::IDENTITY,
            near: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = (0.0..=self.width as f64).contains(&self.principal[0])
            && (0.0..=self.height as f64).contains(&self.principal[1]);
        let valid = self.focal > 0.0 && self.near > 0.0 && inside && self.width > 0 && self.height > 0;
        if !valid {
            return Err(Error::InvalidConfig("invalid camera".into()));
        }
        Ok(())
    }

    /// Pixel coordinates and depth (distance along the view axis) of a world
    /// point, or `None` when it is not in front of the near plane.
    pub fn project(&self, p: Vec3) -> Option<([f64; 2], f64)> {
        let c = self.extrinsic.apply(p);
        let depth = -c.z;
        if depth <= self.near {
            return None;
        }
        Some((
            [
                self.principal[0] + self.focal * c.x / depth,
                self.principal[1] - self.focal * c.y / depth,
            ],
            depth,
        ))
    }

    pub fn position(&self) -> Vec3 {
        self.extrinsic.inverse().translation
    }
}

/// Ambient plus one directional light. `direction` points towards the light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    pub ambient: Rgb,
    pub directional: Rgb,
    pub direction: Vec3,
}

impl Lighting {
    pub fn validate(&self) -> Result<()> {
        let unit = |c: &Rgb| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !unit(&self.ambient) || !unit(&self.directional) {
            return Err(Error::InvalidConfig(
                "light intensities must lie in [0, 1]".into(),
            ));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig("light direction must be unit length".into()));
        }
        Ok(())
    }
}

/// Sampling ranges for [`sample_lighting`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightingRanges {
    pub ambient: [f64; 2],
    pub directional: [f64; 2],
}

impl Default for LightingRanges {
    fn default() -> Self {
        Self {
            ambient: [0.3, 0.7],
            directional: [0.2, 0.8],
        }
    }
}

impl LightingRanges {
    pub fn validate(&self) -> Result<()> {
        for r in [self.ambient, self.directional] {
            if !(0.0 <= r[0] && r[0] <= r[1] && r[1] <= 1.0) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "lighting range {r:?} is not a subset of [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Random ambient and directional light; the direction is uniform on the
/// hemisphere facing the camera (`z ≥ 0`).
pub fn sample_lighting<R: Rng + ?Sized>(rng: &mut R, ranges: &LightingRanges) -> Result<Lighting> {
    ranges.validate()?;
    let uniform = |rng: &mut R, r: [f64; 2]| {
        if r[1] > r[0] {
            rng.random_range(r[0]..=r[1])
        } else {
            r[0]
        }
    };
    let ambient = [0; 3].map(|_| uniform(rng, ranges.ambient));
    let directional = [0; 3].map(|_| uniform(rng, ranges.directional));
    let z: f64 = rng.random_range(0.0..=1.0);
    let phi: f64 = rng.random_range(0.0..core::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Ok(Lighting {
        ambient,
        directional,
        direction: Vec3::new(r * phi.cos(), r * phi.sin(), z),
    })
}

/// Texel addressed by barycentric coordinates: per axis
/// `index = floor(b·(d−1) + 0.5)`.
pub fn texel_lookup(texture: &TextureTensor, face: usize, bary: [f64; 3]) -> Result<Rgb> {
    if face >= texture.faces() {
        return Err(Error::IndexOutOfRange {
            index: face,
            len: texture.faces(),
        });
    }
    Ok(texel_unchecked(texture, face, bary))
}

#[inline]
fn texel_unchecked(texture: &TextureTensor, face: usize, bary: [f64; 3]) -> Rgb {
    let d = texture.resolution();
    let top = (d - 1) as f64;
    let idx = bary.map(|b| ((b.clamp(0.0, 1.0) * top + 0.5).floor() as usize).min(d - 1));
    texture.texel(face, idx[0], idx[1], idx[2])
}

/// Geometry handed to the renderer.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub vertices: &'a [Vec3],
    pub faces: &'a [[u32; 3]],
    /// Part label per face; all faces are part 0 when absent.
    pub face_labels: Option<&'a [u16]>,
    /// 3D joints to project.
    pub joints: &'a [Vec3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint2d {
    /// Pixel position, `None` when the joint is behind the near plane.
    pub position: Option<[f64; 2]>,
    /// In front of the camera and inside the image.
    pub visible: bool,
}

impl Joint2d {
    pub fn at(position: Option<[f64; 2]>, width: usize, height: usize) -> Self {
        let visible = position
            .is_some_and(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] < width as f64 && p[1] < height as f64);
        Self { position, visible }
    }
}

/// Everything one render produces. `rgb` is black wherever `mask` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: Image<Rgb>,
    pub mask: Image<bool>,
    pub part_map: Image<Option<u16>>,
    pub depth: Image<f64>,
    pub joints_2d: Vec<Joint2d>,
    pub bbox: Option<PixelRect>,
}

impl RenderOutput {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            rgb: Image::filled(width, height, [0.0; 3]),
            mask: Image::filled(width, height, false),
            part_map: Image::filled(width, height, None),
            depth: Image::filled(width, height, f64::INFINITY),
            joints_2d: Vec::new(),
            bbox: None,
        }
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    /// Checks `mask ⇔ finite depth ⇔ labelled part` and black RGB outside the
    /// mask; returns the first offending pixel.
    pub fn consistency_violation(&self) -> Option<(usize, usize)> {
        for y in 0..self.height() {
            for x in 0..self.width() {
                let m = *self.mask.get(x, y);
                let d = self.depth.get(x, y).is_finite();
                let p = self.part_map.get(x, y).is_some();
                let black = *self.rgb.get(x, y) == [0.0; 3];
                if m != d || m != p || (!m && !black) {
                    return Some((x, y));
                }
            }
        }
        None
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: i64,
    y: i64,
    fx: f64,
    fy: f64,
    depth: f64,
    slot: usize,
}

#[inline]
fn edge_f(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    (b.fx - a.fx) * (py - a.fy) - (b.fy - a.fy) * (px - a.fx)
}

#[inline]
fn edge(a: &ScreenVertex, b: &ScreenVertex, px: i64, py: i64) -> i64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

#[inline]
fn is_top_left(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    (dy == 0 && dx > 0) || dy < 0
}

/// Rasterizes the scene.
pub fn render(
    scene: &Scene<'_>,
    texture: &TextureTensor,
    camera: &Camera,
    lighting: &Lighting,
) -> Result<RenderOutput> {
    camera.validate()?;
    lighting.validate()?;
    if texture.faces() != scene.faces.len() {
        return Err(Error::TextureFaceMismatch {
            texture: texture.faces(),
            mesh: scene.faces.len(),
        });
    }
    if let Some(l) = scene.face_labels {
        if l.len() != scene.faces.len() {
            return Err(Error::DimensionMismatch {
                expected: scene.faces.len(),
                got: l.len(),
            });
        }
    }
    let nv = scene.vertices.len();
    if let Some(f) = scene.faces.iter().find(|f| f.iter().any(|&i| i as usize >= nv)) {
        return Err(Error::InvalidMesh(alloc::format!(
            "face {f:?} references a missing vertex"
        )));
    }

    let (w, h) = (camera.width, camera.height);
    let mut out = RenderOutput::empty(w, h);
    let projected: Vec<Option<([f64; 2], f64)>> = scene.vertices.iter().map(|&v| camera.project(v)).collect();
    let eye = camera.position();

    for (fi, face) in scene.faces.iter().enumerate() {
        let mut sv = [ScreenVertex {
            x: 0,
            y: 0,
            fx: 0.0,
            fy: 0.0,
            depth: 0.0,
            slot: 0,
        }; 3];
        let mut culled = false;
        for (slot, &vi) in face.iter().enumerate() {
            match projected[vi as usize] {
                Some((p, depth)) if p[0].abs() < MAX_SCREEN_COORD && p[1].abs() < MAX_SCREEN_COORD => {
                    sv[slot] = ScreenVertex {
                        x: (p[0] * SUBPIXEL).round() as i64,
                        y: (p[1] * SUBPIXEL).round() as i64,
                        fx: p[0],
                        fy: p[1],
                        depth,
                        slot,
                    };
                }
                _ => culled = true,
            }
        }
        if culled {
            continue;
        }
        let mut area = edge(&sv[0], &sv[1], sv[2].x, sv[2].y);
        if area == 0 {
            continue;
        }
        if area < 0 {
            sv.swap(1, 2);
            area = -area;
        }

        let sub = 1i64 << SUBPIXEL_BITS;
        let half = sub / 2;
        let minx = sv.iter().map(|v| v.x).min().unwrap();
        let maxx = sv.iter().map(|v| v.x).max().unwrap();
        let miny = sv.iter().map(|v| v.y).min().unwrap();
        let maxy = sv.iter().map(|v| v.y).max().unwrap();
        // Pixel px covers centre px*sub + half.
        let px0 = ((minx - half).div_euclid(sub)).max(0);
        let px1 = ((maxx - half).div_euclid(sub) + 1).min(w as i64 - 1);
        let py0 = ((miny - half).div_euclid(sub)).max(0);
        let py1 = ((maxy - half).div_euclid(sub) + 1).min(h as i64 - 1);
        if px0 > px1 || py0 > py1 {
            continue;
        }

        let [a, b, c] = face.map(|i| scene.vertices[i as usize]);
        let mut normal = (b - a).cross(c - a).normalized();
        if normal.dot(eye - a) < 0.0 {
            normal = -normal;
        }
        let lambert = normal.dot(lighting.direction).max(0.0);
        let shade: Rgb = core::array::from_fn(|ch| lighting.ambient[ch] + lighting.directional[ch] * lambert);
        let label = scene.face_labels.map_or(0, |l| l[fi]);
        let bias = [
            if is_top_left(&sv[1], &sv[2]) { 0 } else { 1 },
            if is_top_left(&sv[2], &sv[0]) { 0 } else { 1 },
            if is_top_left(&sv[0], &sv[1]) { 0 } else { 1 },
        ];
        let area_f = edge_f(&sv[0], &sv[1], sv[2].fx, sv[2].fy);

        for py in py0..=py1 {
            let cy = py * sub + half;
            for px in px0..=px1 {
                let cx = px * sub + half;
                let e = [
                    edge(&sv[1], &sv[2], cx, cy),
                    edge(&sv[2], &sv[0], cx, cy),
                    edge(&sv[0], &sv[1], cx, cy),
                ];
                if e[0] < bias[0] || e[1] < bias[1] || e[2] < bias[2] {
                    continue;
                }
                // Coverage is decided on the snapped grid; interpolation uses
                // the exact projected positions.
                let (fx, fy) = (px as f64 + 0.5, py as f64 + 0.5);
                let raw = [
                    edge_f(&sv[1], &sv[2], fx, fy),
                    edge_f(&sv[2], &sv[0], fx, fy),
                    edge_f(&sv[0], &sv[1], fx, fy),
                ];
                let screen = if area_f > 0.0 {
                    let b = raw.map(|v| (v / area_f).max(0.0));
                    let sum = b[0] + b[1] + b[2];
                    b.map(|v| v / sum)
                } else {
                    e.map(|v| v as f64 / area as f64)
                };
                let inv_depth: f64 = (0..3).map(|k| screen[k] / sv[k].depth).sum();
                let depth = 1.0 / inv_depth;
                let (x, y) = (px as usize, py as usize);
                if depth >= *out.depth.get(x, y) {
                    continue;
                }
                let mut bary = [0.0; 3];
                for k in 0..3 {
                    bary[sv[k].slot] = screen[k] / sv[k].depth * depth;
                }
                let texel = texel_unchecked(texture, fi, bary);
                *out.depth.get_mut(x, y) = depth;
                *out.mask.get_mut(x, y) = true;
                *out.part_map.get_mut(x, y) = Some(label);
                *out.rgb.get_mut(x, y) = core::array::from_fn(|ch| (texel[ch] * shade[ch]).clamp(0.0, 1.0));
            }
        }
    }

    out.joints_2d = scene
        .joints
        .iter()
        .map(|&j| Joint2d::at(camera.project(j).map(|p| p.0), w, h))
        .collect();
    out.bbox = mask_bbox(&out.mask);
    Ok(out)
}
