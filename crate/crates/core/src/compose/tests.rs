use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::render::segment_robot;
use crate::robot_model::{parse_urdf_file, Link, RobotModel, TriangleMesh};
use crate::test_support::fixture;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(150.0, 150.0, 80.0, 60.0, 160, 120).unwrap()
}

fn camera() -> Transform {
    Transform::look_at(&Vector3::new(1.6, 1.2, 1.0), &Vector3::new(0.0, 0.0, 0.4), &Vector3::z())
}

fn ur_with(gripper: RobotModel) -> Embodiment {
    let arm = parse_urdf_file(&fixture("ur6.urdf"), None).unwrap();
    Embodiment::new("ur", arm, gripper, Transform::identity(), Transform::from_translation(0.0, 0.0, 0.1))
}

fn two_finger() -> RobotModel {
    parse_urdf_file(&fixture("parallel_gripper.urdf"), None).unwrap()
}

fn paddle() -> RobotModel {
    let link = Link::new("paddle").with_visual(TriangleMesh::cuboid([0.16, 0.16, 0.04]), Transform::from_translation(0.0, 0.0, 0.05));
    RobotModel::new("paddle", vec![link], vec![]).unwrap()
}

fn noise_image(seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = k();
    Image::from_raw(k.width, k.height, (0..3 * k.pixel_count()).map(|_| rng.random()).collect()).unwrap()
}

fn pose() -> JointState {
    JointState::new(vec![0.3, -1.2, 1.4, -0.9, -1.3, 0.4], 0.7)
}

fn shadow(frame: &Frame, active: &Embodiment, virtual_: &Embodiment, calib_v: &Transform, mode: EditMode) -> CompositeResult {
    edit_frame(frame, active, virtual_, &camera(), calib_v, &k(), &EditConfig::with_mode(mode), &frame.joints).unwrap()
}

fn assert_partition(input: &Image, r: &CompositeResult, c: [u8; 3]) {
    let m = r.composite_mask();
    for (i, (a, b)) in input.pixels().zip(r.edited.pixels()).enumerate() {
        if m.bits[i] {
            assert_eq!(b, c);
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn mode_none_returns_input() {
    let e = ur_with(two_finger());
    let frame = Frame::new(noise_image(1), pose());
    let r = shadow(&frame, &e, &e, &camera(), EditMode::None);
    assert_eq!(r.edited, frame.image);
    assert!(r.active_mask.is_empty() && r.virtual_mask.is_empty());
}

#[test]
fn pixels_split_into_fill_and_untouched() {
    let source = ur_with(two_finger());
    let target = ur_with(paddle());
    let calib_t = Transform::from_translation(0.05, -0.03, 0.02) * camera();
    let frame = Frame::new(noise_image(2), pose());
    for mode in [EditMode::Shadow, EditMode::BlackOnly] {
        let cfg = EditConfig { fill_color: [10, 200, 30], ..EditConfig::with_mode(mode) };
        let r = edit_frame(&frame, &source, &target, &camera(), &calib_t, &k(), &cfg, &source.mid_range()).unwrap();
        assert!(r.active_mask.count() > 100);
        assert_partition(&frame.image, &r, cfg.fill_color);
    }
}

#[test]
fn editing_twice_changes_nothing() {
    let e = ur_with(two_finger());
    let t = ur_with(paddle());
    let frame = Frame::new(noise_image(3), pose());
    let once = shadow(&frame, &e, &t, &camera(), EditMode::Shadow);
    let again = shadow(&Frame::new(once.edited.clone(), pose()), &e, &t, &camera(), EditMode::Shadow);
    assert_eq!(once.edited, again.edited);
}

#[test]
fn overlay_order_is_irrelevant() {
    let e = ur_with(two_finger());
    let t = ur_with(paddle());
    let frame = Frame::new(noise_image(4), pose());
    let r = shadow(&frame, &e, &t, &camera(), EditMode::Shadow);
    let mut reversed = frame.image.clone();
    reversed.fill_mask(&r.virtual_mask, [0, 0, 0]);
    reversed.fill_mask(&r.active_mask, [0, 0, 0]);
    assert_eq!(reversed, r.edited);
}

#[test]
fn black_only_differs_from_shadow_only_on_virtual_pixels() {
    let e = ur_with(two_finger());
    let t = ur_with(paddle());
    let calib_t = Transform::from_translation(0.0, 0.08, 0.0) * camera();
    let frame = Frame::new(noise_image(5), pose());
    let s = shadow(&frame, &e, &t, &calib_t, EditMode::Shadow);
    let b = shadow(&frame, &e, &t, &calib_t, EditMode::BlackOnly);
    assert_eq!(s.active_mask, b.active_mask);
    let only_virtual = s.virtual_mask.difference(&s.active_mask).unwrap();
    assert!(only_virtual.count() > 0);
    for (i, (x, y)) in s.edited.pixels().zip(b.edited.pixels()).enumerate() {
        assert_eq!(x != y, only_virtual.bits[i] && frame.image.pixels().nth(i).unwrap() != [0, 0, 0]);
    }
}

#[test]
fn self_transfer_reproduces_the_active_robot() {
    let e = ur_with(two_finger());
    let frame = Frame::new(noise_image(6), pose());
    let cfg = EditConfig::default();
    let r = edit_frame(&frame, &e, &e, &camera(), &camera(), &k(), &cfg, &e.mid_range()).unwrap();
    assert!(r.ik_converged);
    let vq = r.virtual_q.unwrap();
    let (a, b) = (fk(&e, &frame.joints).unwrap().ee, fk(&e, &vq).unwrap().ee);
    assert!((a.translation() - b.translation()).norm() < cfg.ik.tol_pos);
    assert!(a.angle_to(&b) < cfg.ik.tol_rot);
    assert_eq!(vq.aperture, frame.joints.aperture);
    // From the warm start the solve is immediate and the masks coincide bit for bit.
    let warm = edit_frame(&frame, &e, &e, &camera(), &camera(), &k(), &cfg, &frame.joints).unwrap();
    assert_eq!(warm.virtual_mask, warm.active_mask);
}

#[test]
fn different_gripper_is_covered() {
    let source = ur_with(two_finger());
    let target = ur_with(paddle());
    let frame = Frame::new(noise_image(7), pose());
    let r = shadow(&frame, &source, &target, &camera(), EditMode::Shadow);
    assert!(r.ik_converged);
    // Render only the target gripper: same tree with the arm's visuals removed.
    let bare: Vec<Link> = target.arm().links().iter().map(|l| Link::new(&l.name)).collect();
    let bare_arm = RobotModel::new("bare", bare, target.arm().joints().to_vec()).unwrap();
    let gripper_only = Embodiment::new("g", bare_arm, paddle(), *target.mount(), *target.tcp());
    let g = segment_robot(r.virtual_q.as_ref().unwrap(), &gripper_only, &k(), &camera()).unwrap();
    assert!(g.count() > 20);
    assert!(g.is_subset_of(&r.virtual_mask));
    assert!(g.is_subset_of(&r.composite_mask()));
    assert!(r.edited.pixels().zip(&g.bits).all(|(p, &m)| !m || p == [0, 0, 0]));
}

#[test]
fn edit_train_and_eval_swap_roles() {
    let source = ur_with(two_finger());
    let target = ur_with(paddle());
    let (cs, ct) = (camera(), Transform::from_translation(0.02, 0.0, 0.0) * camera());
    let ctx = EditContext { source: &source, target: &target, calib_source: &cs, calib_target: &ct, k: &k() };
    let frame = Frame::new(noise_image(8), pose());
    let cfg = EditConfig::default();
    let tr = edit_train(&frame, &ctx, &cfg, &frame.joints).unwrap();
    assert_eq!(tr, edit_frame(&frame, &source, &target, &cs, &ct, &k(), &cfg, &frame.joints).unwrap());
    let ev = edit_eval(&frame, &ctx, &cfg, &frame.joints).unwrap();
    assert_eq!(ev, edit_frame(&frame, &target, &source, &ct, &cs, &k(), &cfg, &frame.joints).unwrap());
    let raw = edit_eval(&frame, &ctx, &EditConfig::with_mode(EditMode::None), &frame.joints).unwrap();
    assert_eq!(raw.edited, frame.image);
}

#[test]
fn scene_depth_hides_occluded_robot_pixels() {
    let e = ur_with(two_finger());
    let mut frame = Frame::new(noise_image(9), pose());
    let k = k();
    frame.scene_depth = Some(DepthBuffer::filled(k.width, k.height, 0.05));
    let r = shadow(&frame, &e, &e, &camera(), EditMode::Shadow);
    assert!(r.active_mask.is_empty() && r.virtual_mask.is_empty());
    assert_eq!(r.edited, frame.image);
}

#[test]
fn errors() {
    let e = ur_with(two_finger());
    let small = Frame::new(Image::filled(10, 10, [0; 3]), pose());
    let cfg = EditConfig::default();
    assert!(matches!(
        edit_frame(&small, &e, &e, &camera(), &camera(), &k(), &cfg, &pose()),
        Err(ComposeError::DimensionMismatch { .. })
    ));
    let frame = Frame::new(noise_image(10), pose());
    let empty = Embodiment::arm_only(RobotModel::empty("none"), Transform::identity());
    assert_eq!(edit_frame(&frame, &e, &empty, &camera(), &camera(), &k(), &cfg, &pose()), Err(ComposeError::EmptyVirtual));
    let bad = Frame::new(noise_image(10), JointState::new(vec![9.0; 6], 0.0));
    assert!(matches!(edit_frame(&bad, &e, &e, &camera(), &camera(), &k(), &cfg, &pose()), Err(ComposeError::Kinematics(_))));
    let cfg = EditConfig::with_mode(EditMode::BlackOnly);
    assert!(matches!(edit_frame(&bad, &e, &e, &camera(), &camera(), &k(), &cfg, &pose()), Err(ComposeError::Kinematics(_))));
    assert_eq!(Image::from_raw(2, 2, vec![0; 11]), Err(ComposeError::BufferSize { expected: 12, got: 11 }));
}

#[test]
fn fixed_virtual_pose_matches_solved_pose() {
    let e = ur_with(two_finger());
    let frame = Frame::new(noise_image(11), pose());
    let cfg = EditConfig::default();
    let solved = edit_frame(&frame, &e, &e, &camera(), &camera(), &k(), &cfg, &frame.joints).unwrap();
    let q = solved.virtual_q.clone().unwrap();
    let given = edit_frame_at(&frame, &e, &e, &camera(), &camera(), &k(), &cfg, &q).unwrap();
    assert_eq!(given, solved);
}
