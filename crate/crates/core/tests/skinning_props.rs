use std::sync::OnceLock;

use caninesynth_core::linalg::{Quat, Rigid, Vec3};
use caninesynth_core::mesh::{
    apply_lbs, forward_kinematics, generate_canonical_dog, part_labels, root_placement, DogConfig,
    PoseLibrary, PoseParams, RiggedMesh, JOINT_COUNT,
};
use proptest::prelude::*;

fn dog() -> &'static RiggedMesh {
    static DOG: OnceLock<RiggedMesh> = OnceLock::new();
    DOG.get_or_init(|| generate_canonical_dog(&DogConfig::default()).unwrap())
}

fn quat() -> impl Strategy<Value = Quat> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(w, x, y, z)| {
            w * w + x * x + y * y + z * z > 1e-3
        })
        .prop_map(|(w, x, y, z)| Quat { w, x, y, z }.normalized())
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = PoseParams> {
    (prop::collection::vec(quat(), JOINT_COUNT), quat(), 0.0f64..10.0).prop_map(
        |(joint_rotations, root_rotation, root_depth)| PoseParams {
            joint_rotations,
            root_rotation,
            root_depth,
        },
    )
}

#[test]
fn identity_pose_reproduces_rest_mesh() {
    let mesh = dog();
    let kin = forward_kinematics(mesh.skeleton(), &PoseParams::identity(JOINT_COUNT)).unwrap();
    for (p, r) in kin.positions.iter().zip(mesh.skeleton().rest_positions()) {
        assert!(p.max_abs_diff(r) <= 1e-12);
    }
    let posed = apply_lbs(mesh, &kin.globals).unwrap();
    for (p, r) in posed.iter().zip(mesh.vertices()) {
        assert!(p.max_abs_diff(*r) <= 1e-10);
    }
    assert!(apply_lbs(mesh, &[Rigid::IDENTITY; 3]).is_err());
}

#[test]
fn generated_dog_is_valid_and_reproducible() {
    let mesh = dog();
    assert_eq!(mesh.faces().len(), 4848);
    assert_eq!(mesh.skeleton().len(), JOINT_COUNT);
    let w = mesh.weights();
    for v in 0..w.n_vertices() {
        let row = w.row(v);
        assert!(row.iter().all(|x| *x >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        assert!(row.iter().filter(|x| **x > 0.0).count() <= 4);
    }
    let labels = part_labels(w, mesh.faces());
    assert_eq!(labels.vertex.len(), mesh.vertices().len());
    assert!(labels.vertex.iter().all(|l| (*l as usize) < JOINT_COUNT));
    // Every joint except possibly the leaves owns some vertices.
    let owned: std::collections::BTreeSet<u16> = labels.vertex.iter().copied().collect();
    assert!(owned.len() >= JOINT_COUNT - 6, "{owned:?}");

    let again = generate_canonical_dog(&DogConfig::default()).unwrap();
    assert_eq!(&again, mesh);
}

#[test]
fn procedural_pose_library_is_valid() {
    let lib = PoseLibrary::procedural(dog().skeleton()).unwrap();
    assert!(lib.len() >= 12);
    for p in lib.poses() {
        let pose = PoseParams {
            joint_rotations: p.rotations.clone(),
            root_rotation: Quat::IDENTITY,
            root_depth: 3.0,
        };
        let kin = forward_kinematics(dog().skeleton(), &pose).unwrap();
        assert!(kin.positions.iter().all(|v| v.is_finite()));
    }
}

fn flattened(mesh: &RiggedMesh, pose: &PoseParams, j: usize) -> Rigid {
    let joints = mesh.skeleton().joints();
    let mut path = vec![j];
    while let Some(p) = joints[*path.last().unwrap()].parent {
        path.push(p);
    }
    path.reverse();
    path.iter().fold(root_placement(pose), |acc, &k| {
        acc * joints[k].rest_local * Rigid::from_rotation(pose.joint_rotations[k])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn skinning_commutes_with_global_rigid_motion(pose in pose(), q in quat(), t in vec3(5.0)) {
        let mesh = dog();
        let kin = forward_kinematics(mesh.skeleton(), &pose).unwrap();
        let motion = Rigid::new(q, t);
        let moved: Vec<Rigid> = kin.globals.iter().map(|g| motion * *g).collect();
        let a = apply_lbs(mesh, &moved).unwrap();
        let b = apply_lbs(mesh, &kin.globals).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.max_abs_diff(motion.apply(*y)) <= 1e-8);
        }
    }

    #[test]
    fn chained_and_flattened_kinematics_agree(pose in pose()) {
        let mesh = dog();
        let kin = forward_kinematics(mesh.skeleton(), &pose).unwrap();
        for j in 0..JOINT_COUNT {
            let f = flattened(mesh, &pose, j);
            prop_assert!(kin.globals[j].translation.max_abs_diff(f.translation) <= 1e-10);
            let probe = Vec3::new(0.3, -0.2, 0.7);
            prop_assert!(kin.globals[j].apply(probe).max_abs_diff(f.apply(probe)) <= 1e-10);
        }
    }

    #[test]
    fn posed_vertices_are_finite(pose in pose()) {
        let mesh = dog();
        let kin = forward_kinematics(mesh.skeleton(), &pose).unwrap();
        let posed = apply_lbs(mesh, &kin.globals).unwrap();
        prop_assert_eq!(posed.len(), mesh.vertices().len());
        prop_assert!(posed.iter().all(|v| v.is_finite()));
    }
}
