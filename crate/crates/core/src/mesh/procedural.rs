//! Deterministic procedural quadruped.
//!
//! The dog is assembled from lofted tubes (torso, neck, head, two ears, four
//! three-segment legs, tail). Each tube is a sequence of elliptical rings
//! along a polyline, closed by a pole vertex at each end, so a part with `k`
//! rings of `s` vertices contributes exactly `2·s·k` triangles. Every joint
//! sits at the centre of one ring; those rings form the joint regressor, which
//! keeps the skeleton attached when the mesh is reshaped.

// Inherent float methods are missing when std is not linked.
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Rigid, Vec3};
use crate::pca::TextureTensor;

use super::{part_labels, Joint, JointRegressor, RiggedMesh, Skeleton, SkinningWeights};

pub const JOINT_COUNT: usize = 25;

const JOINTS: [(&str, Option<usize>); JOINT_COUNT] = [
    ("root", None),
    ("spine_1", Some(0)),
    ("spine_2", Some(1)),
    ("spine_3", Some(2)),
    ("neck", Some(3)),
    ("head", Some(4)),
    ("jaw", Some(5)),
    ("ear_left", Some(5)),
    ("ear_right", Some(5)),
    ("front_left_upper", Some(3)),
    ("front_left_lower", Some(9)),
    ("front_left_paw", Some(10)),
    ("front_right_upper", Some(3)),
    ("front_right_lower", Some(12)),
    ("front_right_paw", Some(13)),
    ("hind_left_upper", Some(0)),
    ("hind_left_lower", Some(15)),
    ("hind_left_paw", Some(16)),
    ("hind_right_upper", Some(0)),
    ("hind_right_lower", Some(18)),
    ("hind_right_paw", Some(19)),
    ("tail_1", Some(0)),
    ("tail_2", Some(21)),
    ("tail_3", Some(22)),
    ("tail_4", Some(23)),
];

const ROOT: usize = 0;
const SPINE: [usize; 3] = [1, 2, 3];
const NECK: usize = 4;
const HEAD: usize = 5;
const JAW: usize = 6;
const EARS: [usize; 2] = [7, 8];
const LEGS: [usize; 4] = [9, 12, 15, 18];
const TAIL: [usize; 4] = [21, 22, 23, 24];

/// Names of the 25 procedural joints in skeleton order.
pub fn joint_names() -> Vec<String> {
    JOINTS.iter().map(|(n, _)| n.to_string()).collect()
}

/// Body dimensions in metres. Torso height and width are semi-axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DogProportions {
    pub torso_length: f64,
    pub torso_height: f64,
    pub torso_width: f64,
    pub leg_upper: f64,
    pub leg_lower: f64,
    pub paw_length: f64,
    pub leg_radius: f64,
    pub neck_length: f64,
    pub neck_radius: f64,
    pub head_length: f64,
    pub head_radius: f64,
    pub tail_length: f64,
    pub tail_radius: f64,
    pub ear_length: f64,
    pub ear_radius: f64,
}

impl Default for DogProportions {
    fn default() -> Self {
        Self {
            torso_length: 0.9,
            torso_height: 0.17,
            torso_width: 0.14,
            leg_upper: 0.2,
            leg_lower: 0.18,
            paw_length: 0.08,
            leg_radius: 0.045,
            neck_length: 0.22,
            neck_radius: 0.065,
            head_length: 0.28,
            head_radius: 0.08,
            tail_length: 0.36,
            tail_radius: 0.025,
            ear_length: 0.09,
            ear_radius: 0.025,
        }
    }
}

impl DogProportions {
    fn fields_mut(&mut self) -> [&mut f64; 15] {
        [
            &mut self.torso_length,
            &mut self.torso_height,
            &mut self.torso_width,
            &mut self.leg_upper,
            &mut self.leg_lower,
            &mut self.paw_length,
            &mut self.leg_radius,
            &mut self.neck_length,
            &mut self.neck_radius,
            &mut self.head_length,
            &mut self.head_radius,
            &mut self.tail_length,
            &mut self.tail_radius,
            &mut self.ear_length,
            &mut self.ear_radius,
        ]
    }

    fn validate(&self) -> Result<()> {
        let mut copy = *self;
        if copy.fields_mut().iter().any(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidConfig(
                "every body dimension must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Configuration of one procedural dog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DogConfig {
    pub proportions: DogProportions,
    pub face_budget: usize,
    pub seed: u64,
    /// Relative uniform jitter applied to every dimension, drawn from `seed`.
    pub jitter: f64,
}

impl Default for DogConfig {
    fn default() -> Self {
        Self {
            proportions: DogProportions::default(),
            face_budget: 4848,
            seed: 0,
            jitter: 0.0,
        }
    }
}

/// Smallest ring count each part needs to host its joints.
const MIN_RINGS: usize = 28;
const MIN_FACE_BUDGET: usize = 200;

/// Ring segments and total ring count for a face budget, plus the resulting
/// triangle count.
pub fn planned_face_count(budget: usize) -> Result<(usize, usize, usize)> {
    if budget < MIN_FACE_BUDGET {
        return Err(Error::InvalidConfig(alloc::format!(
            "face budget {budget} is below the minimum of {MIN_FACE_BUDGET}"
        )));
    }
    for segments in (3..=12).rev() {
        let rings = ((budget as f64) / (2.0 * segments as f64)).round() as usize;
        if rings >= MIN_RINGS {
            return Ok((segments, rings, 2 * segments * rings));
        }
    }
    unreachable!("budget ≥ 200 always admits three segments")
}

#[derive(Clone, Copy)]
enum Profile {
    /// Semi-ellipse along the whole path.
    Ellipsoid { radius: f64 },
    /// Linear taper with rounded ends of length `cap`.
    Tube { start: f64, end: f64, cap: f64 },
}

struct Bone {
    joint: usize,
    from: Vec3,
    to: Vec3,
}

struct Part {
    path: Vec<Vec3>,
    /// `(joint, arc-length parameter)` of rings centred on joints.
    anchors: Vec<(usize, f64)>,
    profile: Profile,
    /// Cross-section width / height.
    aspect: f64,
    reference: Vec3,
    bones: Vec<Bone>,
    sigma: f64,
    ring_weight: f64,
}

impl Part {
    fn length(&self) -> f64 {
        self.path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    fn param_of_point(&self, idx: usize) -> f64 {
        self.path[..=idx].windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Position and unit tangent at arc length `t`. Tangents at interior
    /// polyline vertices are the average of both segment directions.
    fn frame_at(&self, t: f64) -> (Vec3, Vec3) {
        let mut acc = 0.0;
        let n = self.path.len();
        for i in 0..n - 1 {
            let a = self.path[i];
            let b = self.path[i + 1];
            let len = (b - a).norm();
            let dir = (b - a) * (1.0 / len);
            if t <= acc + len || i == n - 2 {
                let local = (t - acc).clamp(0.0, len);
                let pos = a + dir * local;
                let mut tangent = dir;
                if local >= len - 1e-12 && i + 2 < n {
                    tangent = (dir + (self.path[i + 2] - b).normalized()).normalized();
                } else if local <= 1e-12 && i > 0 {
                    tangent = (dir + (a - self.path[i - 1]).normalized()).normalized();
                }
                return (pos, tangent);
            }
            acc += len;
        }
        unreachable!("paths have at least two points")
    }

    fn radius_at(&self, t: f64) -> f64 {
        let len = self.length();
        let u = t / len;
        match self.profile {
            Profile::Ellipsoid { radius } => radius * (1.0 - (2.0 * u - 1.0).powi(2)).max(0.0).sqrt(),
            Profile::Tube { start, end, cap } => {
                let base = start + (end - start) * u;
                let edge = t.min(len - t);
                if edge < cap {
                    let x = 1.0 - edge / cap;
                    base * (1.0 - x * x).max(0.0).sqrt()
                } else {
                    base
                }
            }
        }
    }

    /// Ring parameters: anchors plus extras spread over the gaps between them
    /// in proportion to gap length.
    fn ring_params(&self, rings: usize) -> Vec<f64> {
        let len = self.length();
        let mut anchors: Vec<f64> = self.anchors.iter().map(|a| a.1).collect();
        anchors.sort_by(f64::total_cmp);
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(&anchors);
        bounds.push(len);
        let gaps: Vec<f64> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        let extras = rings - anchors.len();
        let counts = largest_remainder(extras, &gaps);
        let mut params = Vec::with_capacity(rings);
        for (g, &m) in counts.iter().enumerate() {
            let (lo, hi) = (bounds[g], bounds[g + 1]);
            for i in 0..m {
                params.push(lo + (hi - lo) * (i + 1) as f64 / (m + 1) as f64);
            }
            if g < anchors.len() {
                params.push(anchors[g]);
            }
        }
        params
    }

    fn weights_at(&self, p: Vec3) -> Vec<(usize, f64)> {
        let dists: Vec<(usize, f64)> = self
            .bones
            .iter()
            .map(|b| (b.joint, p.distance_to_segment(b.from, b.to)))
            .collect();
        let dmin = dists.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        let mut w: Vec<(usize, f64)> = dists
            .iter()
            .map(|&(j, d)| (j, (-(d * d - dmin * dmin) / (self.sigma * self.sigma)).exp()))
            .collect();
        w.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        w.truncate(super::MAX_INFLUENCES);
        w.retain(|x| x.1 >= 1e-3);
        let sum: f64 = w.iter().map(|x| x.1).sum();
        for x in w.iter_mut() {
            x.1 /= sum;
        }
        w
    }
}

/// Splits `total` into integer parts proportional to `shares`.
fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| total as f64 * s / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Distributes `total` rings over parts with per-part minimums.
fn allocate_rings(total: usize, weights: &[f64], minimums: &[usize]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut alloc: Vec<usize> = ideal
        .iter()
        .zip(minimums)
        .map(|(i, &m)| (i.floor() as usize).max(m))
        .collect();
    loop {
        let sum: usize = alloc.iter().sum();
        if sum == total {
            break;
        }
        if sum < total {
            let i = (0..alloc.len())
                .max_by(|&a, &b| {
                    (ideal[a] - alloc[a] as f64)
                        .total_cmp(&(ideal[b] - alloc[b] as f64))
                        .then(b.cmp(&a))
                })
                .unwrap();
            alloc[i] += 1;
        } else {
            let Some(i) = (0..alloc.len())
                .filter(|&i| alloc[i] > minimums[i])
                .max_by(|&a, &b| {
                    (alloc[a] as f64 - ideal[a])
                        .total_cmp(&(alloc[b] as f64 - ideal[b]))
                        .then(b.cmp(&a))
                })
            else {
                break;
            };
            alloc[i] -= 1;
        }
    }
    alloc
}

fn jittered(config: &DogConfig) -> Result<DogProportions> {
    config.proportions.validate()?;
    if !(0.0..0.5).contains(&config.jitter) {
        return Err(Error::InvalidConfig("jitter must lie in [0, 0.5)".into()));
    }
    let mut p = config.proportions;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for v in p.fields_mut() {
        let u: f64 = rng.random_range(-1.0..=1.0);
        *v *= 1.0 + config.jitter * u;
    }
    Ok(p)
}

fn joint_positions(p: &DogProportions) -> [Vec3; JOINT_COUNT] {
    let l = p.torso_length;
    let h = p.torso_height;
    let w = p.torso_width;
    let mut j = [Vec3::ZERO; JOINT_COUNT];
    j[ROOT] = Vec3::ZERO;
    for (k, &s) in SPINE.iter().enumerate() {
        j[s] = Vec3::new(0.12 * l * (k + 1) as f64, 0.0, 0.0);
    }
    j[NECK] = Vec3::new(0.42 * l, 0.45 * h, 0.0);
    j[HEAD] = j[NECK] + neck_dir() * p.neck_length;
    j[JAW] = j[HEAD] + head_dir() * (0.35 * p.head_length);
    for (side, &e) in [1.0, -1.0].iter().zip(&EARS) {
        j[e] = j[HEAD] + Vec3::new(0.0, 0.75 * p.head_radius, side * 0.45 * p.head_radius);
    }
    for (leg, &upper) in LEGS.iter().enumerate() {
        let front = leg < 2;
        let side = if leg % 2 == 0 { 1.0 } else { -1.0 };
        let hip = if front {
            Vec3::new(0.36 * l, -0.45 * h, side * 0.55 * w)
        } else {
            Vec3::new(-0.33 * l, -0.4 * h, side * 0.55 * w)
        };
        let (knee_dx, ankle_dx) = if front { (0.02, -0.02) } else { (0.05, -0.07) };
        let knee = hip + Vec3::new(knee_dx, -p.leg_upper, 0.0);
        let ankle = knee + Vec3::new(ankle_dx, -p.leg_lower, 0.0);
        j[upper] = hip;
        j[upper + 1] = knee;
        j[upper + 2] = ankle;
    }
    for (k, &t) in TAIL.iter().enumerate() {
        j[t] = tail_base(p) + tail_dir() * (p.tail_length * k as f64 / 4.0);
    }
    j
}

fn neck_dir() -> Vec3 {
    Vec3::new(0.55, 0.83, 0.0).normalized()
}

fn head_dir() -> Vec3 {
    Vec3::new(1.0, -0.25, 0.0).normalized()
}

fn tail_dir() -> Vec3 {
    Vec3::new(-0.8, 0.6, 0.0).normalized()
}

fn tail_base(p: &DogProportions) -> Vec3 {
    Vec3::new(-0.44 * p.torso_length, 0.3 * p.torso_height, 0.0)
}

fn paw_tip(ankle: Vec3, p: &DogProportions) -> Vec3 {
    ankle + Vec3::new(0.9, -0.44, 0.0).normalized() * p.paw_length
}

fn build_parts(p: &DogProportions, j: &[Vec3; JOINT_COUNT]) -> Vec<Part> {
    let l = p.torso_length;
    let scale = l / 0.9;
    let bone = |joint: usize, from: Vec3, to: Vec3| Bone { joint, from, to };
    let mut parts = Vec::new();

    // Torso, along +x.
    let rear = Vec3::new(-0.5 * l, 0.0, 0.0);
    let front = Vec3::new(0.5 * l, 0.0, 0.0);
    parts.push(Part {
        path: vec![rear, front],
        anchors: [ROOT, SPINE[0], SPINE[1], SPINE[2]]
            .iter()
            .map(|&k| (k, j[k].x + 0.5 * l))
            .collect(),
        profile: Profile::Ellipsoid {
            radius: p.torso_height,
        },
        aspect: p.torso_width / p.torso_height,
        reference: Vec3::Y,
        bones: vec![
            bone(ROOT, rear, j[SPINE[0]]),
            bone(SPINE[0], j[SPINE[0]], j[SPINE[1]]),
            bone(SPINE[1], j[SPINE[1]], j[SPINE[2]]),
            bone(SPINE[2], j[SPINE[2]], front),
        ],
        sigma: 0.06 * scale,
        ring_weight: 40.0,
    });

    // Neck.
    let lead = 0.06 * scale;
    parts.push(Part {
        path: vec![j[NECK] - neck_dir() * lead, j[HEAD] + neck_dir() * (0.04 * scale)],
        anchors: vec![(NECK, lead)],
        profile: Profile::Tube {
            start: p.neck_radius,
            end: 0.8 * p.neck_radius,
            cap: 0.05 * scale,
        },
        aspect: 0.9,
        reference: Vec3::Z,
        bones: vec![
            bone(SPINE[2], j[SPINE[2]], j[NECK]),
            bone(NECK, j[NECK], j[HEAD]),
            bone(HEAD, j[HEAD], j[JAW]),
        ],
        sigma: 0.04 * scale,
        ring_weight: 12.0,
    });

    // Head, snout pointing forward and slightly down.
    let back = 0.3 * p.head_length;
    let head_start = j[HEAD] - head_dir() * back;
    let head_end = j[HEAD] + head_dir() * (0.7 * p.head_length);
    parts.push(Part {
        path: vec![head_start, head_end],
        anchors: vec![(HEAD, back), (JAW, back + 0.35 * p.head_length)],
        profile: Profile::Tube {
            start: p.head_radius,
            end: 0.45 * p.head_radius,
            cap: 0.3 * p.head_length,
        },
        aspect: 0.85,
        reference: Vec3::Y,
        bones: vec![
            bone(NECK, j[NECK], j[HEAD]),
            bone(HEAD, head_start, j[JAW]),
            bone(JAW, j[JAW], head_end),
        ],
        sigma: 0.04 * scale,
        ring_weight: 24.0,
    });

    for (side, &e) in [1.0, -1.0].iter().zip(&EARS) {
        let dir = Vec3::new(-0.15, 1.0, side * 0.35).normalized();
        let lead = 0.02 * scale;
        let tip = j[e] + dir * p.ear_length;
        parts.push(Part {
            path: vec![j[e] - dir * lead, tip],
            anchors: vec![(e, lead)],
            profile: Profile::Tube {
                start: p.ear_radius,
                end: 0.3 * p.ear_radius,
                cap: 0.5 * p.ear_radius,
            },
            aspect: 0.5,
            reference: Vec3::X,
            bones: vec![bone(HEAD, j[HEAD], j[e]), bone(e, j[e], tip)],
            sigma: 0.02 * scale,
            ring_weight: 8.0,
        });
    }

    for (leg, &upper) in LEGS.iter().enumerate() {
        let parent = if leg < 2 { SPINE[2] } else { ROOT };
        let hip = j[upper];
        let knee = j[upper + 1];
        let ankle = j[upper + 2];
        let toe = paw_tip(ankle, p);
        let top = hip + Vec3::new(0.0, 0.06 * scale, 0.0);
        let mut part = Part {
            path: vec![top, hip, knee, ankle, toe],
            anchors: vec![],
            profile: Profile::Tube {
                start: p.leg_radius,
                end: 0.7 * p.leg_radius,
                cap: p.leg_radius,
            },
            aspect: 1.0,
            reference: Vec3::Z,
            bones: vec![
                bone(parent, top + Vec3::new(0.0, 0.04 * scale, 0.0), hip),
                bone(upper, hip, knee),
                bone(upper + 1, knee, ankle),
                bone(upper + 2, ankle, toe),
            ],
            sigma: 0.03 * scale,
            ring_weight: 22.0,
        };
        part.anchors = vec![
            (upper, part.param_of_point(1)),
            (upper + 1, part.param_of_point(2)),
            (upper + 2, part.param_of_point(3)),
        ];
        parts.push(part);
    }

    let lead = 0.03 * scale;
    let tail_tip = tail_base(p) + tail_dir() * p.tail_length;
    let mut tail_bones = vec![bone(ROOT, j[ROOT], j[TAIL[0]])];
    for k in 0..4 {
        let to = if k < 3 { j[TAIL[k + 1]] } else { tail_tip };
        tail_bones.push(bone(TAIL[k], j[TAIL[k]], to));
    }
    parts.push(Part {
        path: vec![j[TAIL[0]] - tail_dir() * lead, tail_tip],
        anchors: (0..4)
            .map(|k| (TAIL[k], lead + p.tail_length * k as f64 / 4.0))
            .collect(),
        profile: Profile::Tube {
            start: p.tail_radius,
            end: 0.4 * p.tail_radius,
            cap: p.tail_radius,
        },
        aspect: 1.0,
        reference: Vec3::Z,
        bones: tail_bones,
        sigma: 0.03 * scale,
        ring_weight: 22.0,
    });

    parts
}

/// Builds the rigged procedural dog. The default configuration yields exactly
/// 4848 faces; other budgets get the closest achievable count (see
/// [`planned_face_count`]).
pub fn generate_canonical_dog(config: &DogConfig) -> Result<RiggedMesh> {
    let (segments, total_rings, _) = planned_face_count(config.face_budget)?;
    let props = jittered(config)?;
    let joints = joint_positions(&props);
    let parts = build_parts(&props, &joints);

    let weights: Vec<f64> = parts.iter().map(|p| p.ring_weight).collect();
    let minimums: Vec<usize> = parts.iter().map(|p| p.anchors.len().max(2)).collect();
    let rings = allocate_rings(total_rings, &weights, &minimums);

    let mut vertices = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut weight_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); JOINT_COUNT];

    for (part, &k) in parts.iter().zip(&rings) {
        let base = vertices.len() as u32;
        let params = part.ring_params(k);
        for &t in &params {
            let (center, tangent) = part.frame_at(t);
            let normal = (part.reference - tangent * part.reference.dot(tangent)).normalized();
            let binormal = tangent.cross(normal);
            let r = part.radius_at(t);
            let ring_weights = part.weights_at(center);
            let first = vertices.len() as u32;
            for s in 0..segments {
                let phi = core::f64::consts::TAU * s as f64 / segments as f64;
                let (sin, cos) = phi.sin_cos();
                vertices.push(center + normal * (r * cos) + binormal * (r * part.aspect * sin));
                weight_rows.push(ring_weights.clone());
            }
            for &(joint, at) in &part.anchors {
                if at == t {
                    groups[joint] = (first..first + segments as u32).collect();
                }
            }
        }
        let len = part.length();
        let start_pole = vertices.len() as u32;
        vertices.push(part.frame_at(0.0).0);
        weight_rows.push(part.weights_at(part.frame_at(0.0).0));
        let end_pole = start_pole + 1;
        vertices.push(part.frame_at(len).0);
        weight_rows.push(part.weights_at(part.frame_at(len).0));

        let s = segments as u32;
        let idx = |ring: usize, j: u32| base + ring as u32 * s + (j % s);
        for ring in 0..k - 1 {
            for j in 0..s {
                let a = idx(ring, j);
                let b = idx(ring, j + 1);
                let c = idx(ring + 1, j + 1);
                let d = idx(ring + 1, j);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
        for j in 0..s {
            faces.push([start_pole, idx(0, j + 1), idx(0, j)]);
            faces.push([end_pole, idx(k - 1, j), idx(k - 1, j + 1)]);
        }
    }

    let skeleton = Skeleton::new(
        JOINTS
            .iter()
            .enumerate()
            .map(|(i, &(name, parent))| Joint {
                name: name.to_string(),
                parent,
                rest_local: Rigid::from_translation(match parent {
                    Some(p) => joints[i] - joints[p],
                    None => joints[i],
                }),
            })
            .collect(),
    )?;
    let weights = SkinningWeights::from_sparse_rows(JOINT_COUNT, &weight_rows)?;
    RiggedMesh::new(
        vertices,
        faces,
        skeleton,
        weights,
        Some(JointRegressor { groups }),
    )
}

/// `count` jittered variants of `base`, seeded from `seed`. All share one
/// topology.
pub fn shape_variants(base: &DogConfig, count: usize, jitter: f64, seed: u64) -> Result<Vec<RiggedMesh>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            generate_canonical_dog(&DogConfig {
                seed: rng.random(),
                jitter,
                ..*base
            })
        })
        .collect()
}

const COAT_COLORS: [[f64; 3]; 8] = [
    [0.76, 0.60, 0.42],
    [0.12, 0.10, 0.09],
    [0.92, 0.90, 0.86],
    [0.45, 0.30, 0.18],
    [0.85, 0.65, 0.30],
    [0.55, 0.55, 0.55],
    [0.62, 0.36, 0.20],
    [0.30, 0.24, 0.20],
];

/// Procedural coat textures over the mesh faces: a base colour, a secondary
/// colour in wave-shaped patches, a lighter belly and per-texel noise.
pub fn procedural_textures(
    mesh: &RiggedMesh,
    count: usize,
    resolution: usize,
    seed: u64,
) -> Result<Vec<TextureTensor>> {
    if resolution == 0 {
        return Err(Error::InvalidConfig("texture resolution must be ≥ 1".into()));
    }
    let labels = part_labels(mesh.weights(), mesh.faces());
    let verts = mesh.vertices();
    let ymin = verts.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
    let ymax = verts.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = resolution;

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let base = COAT_COLORS[rng.random_range(0..COAT_COLORS.len())];
        let second = COAT_COLORS[rng.random_range(0..COAT_COLORS.len())];
        let tint: [f64; 3] = core::array::from_fn(|_| rng.random_range(-0.05..0.05));
        let waves: Vec<(Vec3, f64, f64)> = (0..3)
            .map(|_| {
                let dir = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalized();
                (
                    dir,
                    rng.random_range(4.0..14.0),
                    rng.random_range(0.0..core::f64::consts::TAU),
                )
            })
            .collect();
        let patch_level = rng.random_range(0.3..1.6);
        let belly = rng.random_range(0.0..0.35);
        let dark_extremities = rng.random_bool(0.4);

        let mut texels = Vec::with_capacity(mesh.faces().len() * d * d * d * 3);
        for (fi, f) in mesh.faces().iter().enumerate() {
            let [a, b, c] = f.map(|i| verts[i as usize]);
            let label = labels.face[fi] as usize;
            let extremity =
                label >= LEGS[0] && label < TAIL[0] && (label - LEGS[0]) % 3 == 2 || EARS.contains(&label);
            for i in 0..d {
                for jj in 0..d {
                    for k in 0..d {
                        let w = [i as f64 + 0.5, jj as f64 + 0.5, k as f64 + 0.5];
                        let s = w[0] + w[1] + w[2];
                        let p = a * (w[0] / s) + b * (w[1] / s) + c * (w[2] / s);
                        let field: f64 = waves
                            .iter()
                            .map(|(dir, freq, phase)| (p.dot(*dir) * freq + phase).sin())
                            .sum();
                        let mix = smoothstep(patch_level - 0.3, patch_level + 0.3, field);
                        let height = (p.y - ymin) / (ymax - ymin).max(1e-9);
                        let light = belly * (1.0 - smoothstep(0.15, 0.45, height));
                        let noise: f64 = rng.random_range(-0.03..0.03);
                        for ch in 0..3 {
                            let mut v = base[ch] * (1.0 - mix) + second[ch] * mix + tint[ch];
                            v += (1.0 - v) * light;
                            if dark_extremities && extremity {
                                v *= 0.55;
                            }
                            texels.push((v + noise).clamp(0.0, 1.0));
                        }
                    }
                }
            }
        }
        out.push(TextureTensor::new(mesh.faces().len(), d, texels)?);
    }
    Ok(out)
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_budget_is_exact() {
        assert_eq!(planned_face_count(4848).unwrap(), (12, 202, 4848));
        assert!(planned_face_count(199).is_err());
        let (_, _, faces) = planned_face_count(200).unwrap();
        assert!(faces.abs_diff(200) <= 6);
    }

    #[test]
    fn remainder_split_sums() {
        let c = largest_remainder(7, &[1.0, 1.0, 1.0]);
        assert_eq!(c.iter().sum::<usize>(), 7);
        assert_eq!(c, vec![3, 2, 2]);
    }

    #[test]
    fn ring_allocation_respects_minimums() {
        let a = allocate_rings(30, &[40.0, 1.0, 1.0], &[4, 3, 3]);
        assert_eq!(a.iter().sum::<usize>(), 30);
        assert!(a[1] >= 3 && a[2] >= 3);
    }

    #[test]
    fn zero_limb_rejected() {
        let mut cfg = DogConfig::default();
        cfg.proportions.leg_upper = 0.0;
        assert!(matches!(
            generate_canonical_dog(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn joints_sit_on_regressor_rings() {
        let mesh = generate_canonical_dog(&DogConfig::default()).unwrap();
        let regressed = mesh.regressor().unwrap().regress(mesh.vertices());
        for (a, b) in regressed.iter().zip(mesh.skeleton().rest_positions()) {
            assert!(a.max_abs_diff(b) < 1e-12, "{a:?} vs {b:?}");
        }
    }
}
