use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::robot_model::{attach_gripper, parse_urdf_file, JointSpec, Link, RobotModel};
use crate::test_support::{fixture, fixture_arm, planar_arm, random_q};

fn planar_2r() -> Embodiment {
    Embodiment::arm_only(planar_arm(&[1.0, 0.5]), Transform::identity())
}

#[test]
fn planar_straight_and_quarter_turn() {
    let e = planar_2r();
    let ee = fk(&e, &JointState::new(vec![0.0, 0.0], 0.0)).unwrap().ee;
    assert_eq!(*ee.translation(), Vector3::new(1.5, 0.0, 0.0));
    let ee = fk(&e, &JointState::new(vec![FRAC_PI_2, 0.0], 0.0)).unwrap().ee;
    assert!((ee.translation() - Vector3::new(0.0, 1.5, 0.0)).norm() < 1e-12);
}

#[test]
fn planar_jacobian_textbook() {
    let j = jacobian(&planar_2r(), &JointState::new(vec![0.0, 0.0], 0.0)).unwrap();
    assert!((j[(1, 0)] - 1.5).abs() < 1e-15);
    assert!((j[(1, 1)] - 0.5).abs() < 1e-15);
    assert_eq!(j[(5, 0)], 1.0);
    assert_eq!(j[(0, 0)], 0.0);
}

#[test]
fn prismatic_column() {
    let links = vec![Link::new("a"), Link::new("b")];
    let joints = vec![JointSpec {
        name: "slide".into(),
        kind: JointKind::Prismatic,
        parent_link: "a".into(),
        child_link: "b".into(),
        origin: Transform::from_translation(0.2, 0.1, 0.0),
        axis: Vector3::z(),
        limits: [0.0, 1.0],
    }];
    let e = Embodiment::arm_only(RobotModel::new("p", links, joints).unwrap(), Transform::identity());
    let j = jacobian(&e, &JointState::new(vec![0.3], 0.0)).unwrap();
    assert_eq!(j.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn out_of_range_is_rejected() {
    let e = planar_2r();
    assert!(matches!(fk(&e, &JointState::new(vec![3.5, 0.0], 0.0)), Err(KinematicsError::JointOutOfRange { .. })));
    assert!(matches!(fk(&e, &JointState::new(vec![0.0], 0.0)), Err(KinematicsError::JointCountMismatch { .. })));
    assert!(matches!(fk(&e, &JointState::new(vec![0.0, 0.0], 1.5)), Err(KinematicsError::ApertureOutOfRange(_))));
    assert!(fk(&e, &JointState::new(vec![3.0 + 1e-10, 0.0], 0.0)).is_ok());
}

fn fd_jacobian(e: &Embodiment, q: &JointState, h: f64) -> Matrix6xX<f64> {
    let mut out = Matrix6xX::zeros(e.dof());
    for i in 0..e.dof() {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus.values[i] += h;
        minus.values[i] -= h;
        let a = fk_unchecked(e, &plus).ee;
        let b = fk_unchecked(e, &minus).ee;
        let lin = (a.translation() - b.translation()) / (2.0 * h);
        // Angular velocity from the rotation that takes b to a.
        let ang = (a.rotation() * b.rotation().inverse()).scaled_axis() / (2.0 * h);
        out.set_column(i, &Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z));
    }
    out
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["ur6.urdf", "panda7.urdf"] {
        let e = fixture_arm(name);
        for _ in 0..50 {
            let q = random_q(&e, &mut rng);
            let err = (jacobian(&e, &q).unwrap() - fd_jacobian(&e, &q, 1e-6)).abs().max();
            assert!(err < 1e-5, "{name}: {err}");
        }
    }
}

#[test]
fn tcp_offset_is_fixed_in_flange_frame() {
    let arm = parse_urdf_file(&fixture("ur6.urdf"), None).unwrap();
    let e = Embodiment::arm_only(arm, Transform::from_translation(0.0, 0.0, 0.1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let f = fk(&e, &random_q(&e, &mut rng)).unwrap();
        let local = f.flange.inverse() * f.ee;
        assert!((local.translation() - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-12);
        assert!(local.angle_to(&Transform::identity()) < 1e-12);
    }
}

#[test]
fn gripper_fingers_follow_aperture() {
    let arm = parse_urdf_file(&fixture("ur6.urdf"), None).unwrap();
    let hand = parse_urdf_file(&fixture("parallel_gripper.urdf"), None).unwrap();
    let e = attach_gripper(arm, hand, Transform::identity(), Transform::from_translation(0.0, 0.0, 0.1));
    let mut q = e.mid_range();
    q.aperture = 1.0;
    let open = fk(&e, &q).unwrap();
    let l = open.link_pose(&e, "left_finger").unwrap();
    let r = open.link_pose(&e, "right_finger").unwrap();
    assert!(((l.translation() - r.translation()).norm() - 0.08).abs() < 1e-12);
    q.aperture = 0.0;
    let closed = fk(&e, &q).unwrap();
    assert_eq!(closed.link_pose(&e, "left_finger"), closed.link_pose(&e, "hand"));
}

#[test]
fn ik_fixed_point() {
    let e = fixture_arm("panda7.urdf");
    let seed = e.mid_range();
    let target = fk(&e, &seed).unwrap().ee;
    let sol = ik_solve(&e, &target, &seed, &IkParams::default());
    assert!(sol.converged);
    assert_eq!(sol.iters, 0);
    assert_eq!(sol.q, seed);
}

#[test]
fn ik_unreachable_reports_failure() {
    let e = fixture_arm("ur6.urdf");
    let target = Transform::from_translation(10.0, 0.0, 0.0);
    let sol = ik_solve(&e, &target, &e.mid_range(), &IkParams::default());
    assert!(!sol.converged);
    assert!(sol.residual_pos > 0.0);
    assert_eq!(sol.iters, 200);
}

#[test]
fn ik_is_deterministic_and_reaches_targets() {
    let e = fixture_arm("panda7.urdf");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = IkParams::default();
    let mut ok = 0;
    for _ in 0..50 {
        let target = fk(&e, &random_q(&e, &mut rng)).unwrap().ee;
        let a = ik_solve(&e, &target, &e.mid_range(), &p);
        let b = ik_solve(&e, &target, &e.mid_range(), &p);
        assert_eq!(a, b);
        if a.converged {
            assert!(a.residual_pos < 1e-4 && a.residual_rot < 1e-3);
            ok += 1;
        }
    }
    assert!(ok >= 48, "{ok}/50");
}

#[test]
fn ik_position_only() {
    let e = Embodiment::arm_only(planar_arm(&[1.0, 0.8, 0.5]), Transform::identity());
    let target = Transform::from_rpy(0.3, 0.0, 1.0, [0.9, 1.1, 0.0]);
    let p = IkParams { orientation_weight: 0.0, tol_pos: 1e-10, ..IkParams::default() };
    let sol = ik_solve(&e, &target, &e.mid_range(), &p);
    assert!(sol.converged && sol.residual_pos < 1e-10);
    assert!(sol.residual_rot > 0.1);
}

#[test]
fn warm_start_does_not_cost_iterations() {
    let e = fixture_arm("panda7.urdf");
    let p = IkParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut warm_total, mut cold_total) = (0usize, 0usize);
    for _ in 0..5 {
        // A smooth joint-space trajectory.
        let a = random_q(&e, &mut rng);
        let b = e.mid_range();
        let mut prev = e.mid_range();
        for t in 0..30 {
            let s = f64::from(t) / 29.0;
            let q = JointState::new(a.values.iter().zip(&b.values).map(|(x, y)| x + (y - x) * s).collect(), 0.0);
            let target = fk(&e, &q).unwrap().ee;
            let warm = ik_solve(&e, &target, &prev, &p);
            let cold = ik_solve(&e, &target, &e.mid_range(), &p);
            warm_total += warm.iters;
            cold_total += cold.iters;
            prev = warm.q;
        }
    }
    assert!(warm_total <= cold_total, "warm {warm_total} cold {cold_total}");
}

#[test]
fn reexpress_cases() {
    let ee = Transform::from_rpy(0.1, 0.2, 0.3, [0.4, 0.5, 0.6]);
    let calib = Transform::from_rpy(1.0, -0.5, 2.0, [0.1, 0.0, 1.2]);
    let same = reexpress_ee(&ee, &calib, &calib);
    assert!((same.translation() - ee.translation()).norm() < 1e-12 && same.angle_to(&ee) < 1e-12);

    // Target base sits 0.3 m along camera x from the source base; no rotation.
    let src = Transform::from_translation(0.0, 0.0, 1.0);
    let tgt = Transform::from_translation(0.3, 0.0, 1.0);
    let out = reexpress_ee(&ee, &src, &tgt);
    assert!((out.translation() - (ee.translation() - Vector3::new(0.3, 0.0, 0.0))).norm() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let mut r = || rng.random_range(-2.0..2.0);
        let ee = Transform::from_rpy(r(), r(), r(), [r(), r(), r()]);
        let cs = Transform::from_rpy(r(), r(), r(), [r(), r(), r()]);
        let ct = Transform::from_rpy(r(), r(), r(), [r(), r(), r()]);
        let out = reexpress_ee(&ee, &cs, &ct);
        let a = cs * ee;
        let b = ct * out;
        assert!((a.translation() - b.translation()).norm() < 1e-10);
        assert!(a.angle_to(&b) < 1e-10);
    }
}

proptest! {
    #[test]
    fn fk_of_clamped_is_finite(vals in proptest::collection::vec(-1e6f64..1e6, 6), ap in -5.0f64..5.0) {
        let e = fixture_arm("ur6.urdf");
        let q = e.clamp(&JointState::new(vals, ap));
        let f = fk(&e, &q).unwrap();
        prop_assert!(f.link_poses.iter().all(|p| p.translation().iter().all(|v| v.is_finite())));
        prop_assert!(f.ee.quaternion_wxyz().iter().all(|v| v.is_finite()));
    }
}
