// Inherent float methods are missing when std is not linked.
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Quat, Vec3};

use super::Skeleton;

/// A named set of per-joint rotations (`θ_pose`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPose {
    pub name: String,
    pub rotations: Vec<Quat>,
}

/// Poses indexed by skeleton joint.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLibrary {
    n_joints: usize,
    poses: Vec<NamedPose>,
}

impl PoseLibrary {
    pub fn new(n_joints: usize, poses: Vec<NamedPose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidConfig("pose library is empty".into()));
        }
        for p in &poses {
            if p.rotations.len() != n_joints {
                return Err(Error::DimensionMismatch {
                    expected: n_joints,
                    got: p.rotations.len(),
                });
            }
            if let Some(joint) = p.rotations.iter().position(|q| !q.is_unit(super::UNIT_TOLERANCE)) {
                return Err(Error::NonUnitQuaternion {
                    joint,
                    norm: p.rotations[joint].norm(),
                });
            }
        }
        Ok(Self { n_joints, poses })
    }

    /// Builds a library from Euler XYZ degrees keyed by joint name. Joints not
    /// listed keep the identity rotation.
    pub fn from_euler_degrees(
        skeleton: &Skeleton,
        joint_names: &[String],
        poses: &[(String, Vec<[f64; 3]>)],
    ) -> Result<Self> {
        let mut index = Vec::with_capacity(joint_names.len());
        for name in joint_names {
            index.push(
                skeleton
                    .index_of(name)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown joint `{name}`")))?,
            );
        }
        let mut out = Vec::with_capacity(poses.len());
        for (name, eulers) in poses {
            if eulers.len() != joint_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: joint_names.len(),
                    got: eulers.len(),
                });
            }
            let mut rotations = alloc::vec![Quat::IDENTITY; skeleton.len()];
            for (&j, e) in index.iter().zip(eulers) {
                rotations[j] = Quat::from_euler_xyz_deg(*e);
            }
            out.push(NamedPose {
                name: name.clone(),
                rotations,
            });
        }
        Self::new(skeleton.len(), out)
    }

    /// Standing pose, head turns and a 12-frame trot cycle for the
    /// procedural dog skeleton (joints are looked up by name, so missing ones
    /// are ignored).
    pub fn procedural(skeleton: &Skeleton) -> Result<Self> {
        let n = skeleton.len();
        let z = |deg: f64| Quat::from_axis_angle(Vec3::Z, deg.to_radians());
        let y = |deg: f64| Quat::from_axis_angle(Vec3::Y, deg.to_radians());
        let set = |rot: &mut Vec<Quat>, name: &str, q: Quat| {
            if let Some(j) = skeleton.index_of(name) {
                rot[j] = q;
            }
        };

        let mut poses = Vec::new();
        poses.push(NamedPose {
            name: "stand".into(),
            rotations: alloc::vec![Quat::IDENTITY; n],
        });
        for (label, yaw) in [("look_left", 35.0), ("look_right", -35.0)] {
            let mut r = alloc::vec![Quat::IDENTITY; n];
            set(&mut r, "neck", y(yaw * 0.6));
            set(&mut r, "head", y(yaw * 0.4));
            set(&mut r, "tail_1", y(-yaw * 0.5));
            poses.push(NamedPose {
                name: label.into(),
                rotations: r,
            });
        }
        {
            let mut r = alloc::vec![Quat::IDENTITY; n];
            set(&mut r, "neck", z(-25.0));
            set(&mut r, "head", z(-20.0));
            set(&mut r, "jaw", z(-15.0));
            set(&mut r, "tail_1", z(-20.0));
            poses.push(NamedPose {
                name: "sniff".into(),
                rotations: r,
            });
        }

        const FRAMES: usize = 12;
        for f in 0..FRAMES {
            let phase = core::f64::consts::TAU * f as f64 / FRAMES as f64;
            let mut r = alloc::vec![Quat::IDENTITY; n];
            // Diagonal pairs move together in a trot.
            for (leg, offset) in [
                ("front_left", 0.0),
                ("hind_right", 0.0),
                ("front_right", core::f64::consts::PI),
                ("hind_left", core::f64::consts::PI),
            ] {
                let p = phase + offset;
                let swing = 28.0 * p.sin();
                let bend = -30.0 * (p + core::f64::consts::FRAC_PI_2).sin().max(0.0);
                let (upper, lower) = if leg.starts_with("front") {
                    (swing, bend)
                } else {
                    (-swing, -bend)
                };
                set(&mut r, &format!("{leg}_upper"), z(upper));
                set(&mut r, &format!("{leg}_lower"), z(lower));
                set(&mut r, &format!("{leg}_paw"), z(-0.5 * lower));
            }
            set(&mut r, "spine_2", y(4.0 * phase.sin()));
            set(&mut r, "neck", z(5.0 * (2.0 * phase).sin()));
            for t in 1..=4 {
                set(
                    &mut r,
                    &format!("tail_{t}"),
                    y(12.0 * (2.0 * phase + t as f64 * 0.6).sin()),
                );
            }
            poses.push(NamedPose {
                name: format!("trot_{f:02}"),
                rotations: r,
            });
        }
        Self::new(n, poses)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn poses(&self) -> &[NamedPose] {
        &self.poses
    }

    /// Uniformly chosen pose.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &NamedPose {
        &self.poses[rng.random_range(0..self.poses.len())]
    }
}

/// Limits on root tilt for a mostly upright animal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UprightBounds {
    pub max_pitch_deg: f64,
    pub max_roll_deg: f64,
}

impl Default for UprightBounds {
    fn default() -> Self {
        Self {
            max_pitch_deg: 15.0,
            max_roll_deg: 15.0,
        }
    }
}

/// Root orientation as yaw about the vertical axis (Y), pitch about the
/// lateral axis (Z) and roll about the body axis (X), in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootRotation {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl RootRotation {
    /// `R = R_yaw · R_pitch · R_roll`.
    pub fn to_quat(self) -> Quat {
        Quat::from_axis_angle(Vec3::Y, self.yaw_deg.to_radians())
            * Quat::from_axis_angle(Vec3::Z, self.pitch_deg.to_radians())
            * Quat::from_axis_angle(Vec3::X, self.roll_deg.to_radians())
    }

    pub fn within(&self, bounds: &UprightBounds) -> bool {
        self.pitch_deg.abs() <= bounds.max_pitch_deg && self.roll_deg.abs() <= bounds.max_roll_deg
    }
}

/// Yaw uniform in `[0°, 360°)`, pitch and roll uniform within the bounds.
pub fn sample_root_rotation<R: Rng + ?Sized>(rng: &mut R, bounds: &UprightBounds) -> RootRotation {
    let sym = |rng: &mut R, m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
    RootRotation {
        yaw_deg: rng.random_range(0.0..360.0),
        pitch_deg: sym(rng, bounds.max_pitch_deg),
        roll_deg: sym(rng, bounds.max_roll_deg),
    }
}
