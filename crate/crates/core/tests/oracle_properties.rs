use graspgauge::gripper::{default_registry, find_gripper, finger_boxes, GripperModel, GripperPose};
use graspgauge::mesh::primitives;
use graspgauge::oracle::{GraspOracle, OutcomeKind, SimParams};
use graspgauge::sampler::{build_library_with_oracle, sample_antipodal, SamplerParams};
use graspgauge::se3::RigidTransform;
use graspgauge::TriMesh;
use nalgebra::Vector3;
use proptest::prelude::*;

type V3 = Vector3<f64>;

fn gripper(name: &str) -> GripperModel {
    find_gripper(&default_registry(), name).unwrap().clone()
}

fn bracket() -> TriMesh {
    primitives::l_bracket(60.0, 15.0, 30.0)
}

fn pose_of(t: &RigidTransform, c: &graspgauge::sampler::GraspCandidate) -> GripperPose {
    GripperPose {
        t_w2g: t.compose(&c.t_o2g),
        opening: c.opening,
    }
}

#[test]
fn library_grasps_succeed_at_identity() {
    let mesh = bracket();
    for name in ["Robotiq 2F-85", "Franka Hand"] {
        let g = gripper(name);
        let lib = build_library_with_oracle(
            "bracket",
            &mesh,
            &mesh,
            &g,
            200,
            5,
            &SamplerParams::default(),
            &SimParams::default(),
        )
        .unwrap();
        assert!(lib.n_gt() > 0, "{name}");
        let oracle = GraspOracle::new(&mesh, SimParams::default()).unwrap();
        let id = RigidTransform::identity();
        for i in &lib.successful_at_identity {
            let o = oracle.evaluate(&id, &g, &pose_of(&id, &lib.candidates[*i])).unwrap();
            assert_eq!(o.outcome, OutcomeKind::Success, "{name} grasp {i}");
        }
    }
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let mesh = bracket();
    let g = gripper("WSG 50");
    let oracle = GraspOracle::new(&mesh, SimParams::default()).unwrap();
    let t = RigidTransform::rot_z(17.0).with_translation(V3::new(3.0, -2.0, 1.0));
    for c in sample_antipodal(&mesh, &g, 40, 8).unwrap() {
        let a = oracle.evaluate(&t, &g, &pose_of(&RigidTransform::identity(), &c)).unwrap();
        let b = oracle.evaluate(&t, &g, &pose_of(&RigidTransform::identity(), &c)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

fn outcomes_under(mesh: &TriMesh, g: &GripperModel, params: SimParams, t: &RigidTransform) -> Vec<OutcomeKind> {
    let oracle = GraspOracle::new(mesh, params).unwrap();
    sample_antipodal(mesh, g, 30, 21)
        .unwrap()
        .iter()
        .map(|c| oracle.evaluate(t, g, &pose_of(t, c)).unwrap().outcome)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // gravity stays world −z, so only rotations about z keep the load fixed
    #[test]
    fn equivariant_under_z_rotation_and_translation(
        theta in -180.0f64..180.0,
        tx in -300.0f64..300.0, ty in -300.0f64..300.0, tz in -300.0f64..300.0,
    ) {
        let mesh = bracket();
        let g = gripper("Robotiq 2F-85");
        let base = outcomes_under(&mesh, &g, SimParams::default(), &RigidTransform::identity());
        let t = RigidTransform::rot_z(theta).with_translation(V3::new(tx, ty, tz));
        prop_assert_eq!(base, outcomes_under(&mesh, &g, SimParams::default(), &t));
    }

    #[test]
    fn equivariant_under_any_rigid_motion_without_gravity(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.1f64..3.1,
        tx in -300.0f64..300.0, ty in -300.0f64..300.0, tz in -300.0f64..300.0,
    ) {
        let mesh = bracket();
        let g = gripper("Franka Hand");
        let params = SimParams { gravity: V3::zeros(), ..SimParams::default() };
        let base = outcomes_under(&mesh, &g, params, &RigidTransform::identity());
        let t = RigidTransform::from_axis_angle(&V3::new(ax, ay, az), angle).with_translation(V3::new(tx, ty, tz));
        prop_assert_eq!(base, outcomes_under(&mesh, &g, params, &t));
    }

    // Finger boxes only slide outward as the opening grows, so against a
    // convex body each finger overlaps on a single contiguous range of
    // openings and the palm does not depend on the opening at all.
    #[test]
    fn collision_sets_are_intervals_in_opening(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in -3.1f64..3.1,
        tx in -60.0f64..60.0, ty in -60.0f64..60.0, tz in -60.0f64..60.0,
    ) {
        let axis = V3::new(ax, ay, az);
        prop_assume!(axis.norm() > 1e-2);
        let mesh = primitives::cuboid(V3::new(30.0, 60.0, 90.0));
        let g = gripper("Robotiq 2F-85");
        let t = RigidTransform::from_axis_angle(&axis, angle).with_translation(V3::new(tx, ty, tz));
        let id = RigidTransform::identity();
        let mut runs = [0usize; 2];
        let mut previous = [false; 2];
        let mut palm = None;
        for k in 0..=170 {
            let opening = k as f64 * 0.5;
            let boxes = finger_boxes(&g, &GripperPose { t_w2g: t, opening }).unwrap();
            let p = mesh.box_overlap(&id, &boxes.palm.half, &boxes.palm.pose);
            prop_assert_eq!(*palm.get_or_insert(p), p);
            for (i, f) in boxes.fingers.iter().enumerate() {
                let hit = mesh.box_overlap(&id, &f.half, &f.pose);
                if hit && !previous[i] {
                    runs[i] += 1;
                }
                previous[i] = hit;
            }
        }
        prop_assert!(runs.iter().all(|&r| r <= 1), "runs {:?}", runs);
    }
}
