mod common;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use shadowkit_core::render::{Rasterizer, ScreenVertex};
use shadowkit_core::robot_model::parse_urdf;
use shadowkit_core::{fk, ik_solve, jacobian, Embodiment, IkParams, JointState, Transform};

fn random_tris(rng: &mut impl Rng, n: usize, size: f64) -> Vec<ScreenTri> {
    (0..n)
        .map(|_| {
            let c = [rng.random_range(-0.1 * size..1.1 * size), rng.random_range(-0.1 * size..1.1 * size)];
            let r = rng.random_range(1.0..0.4 * size);
            std::array::from_fn(|_| [c[0] + rng.random_range(-r..r), c[1] + rng.random_range(-r..r), rng.random_range(0.5..5.0)])
        })
        .collect()
}

fn rasterize(tris: &[ScreenTri], w: u32, h: u32) -> Rasterizer {
    let mut r = Rasterizer::new(w, h);
    for (i, t) in tris.iter().enumerate() {
        r.draw_screen_triangle(&t.map(|v| ScreenVertex { x: v[0], y: v[1], z: v[2] }), i as u32);
    }
    r
}

#[test]
fn coverage_matches_pixel_center_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (w, h) in [(64, 64), (37, 23)] {
        let tris = random_tris(&mut rng, 200, f64::from(w));
        let r = rasterize(&tris, w, h);
        assert_eq!(r.mask().bits, coverage_oracle(&tris, w, h));
    }
}

#[test]
fn depth_matches_perspective_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let tris = random_tris(&mut rng, 60, 48.0);
    let depth = rasterize(&tris, 48, 48).depth();
    for (a, b) in depth.values.iter().zip(depth_oracle(&tris, 48, 48)) {
        assert!(a == &b || (a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }
}

const PLANAR_2R: &str = r#"<robot name="planar">
  <link name="base"/><link name="upper"/><link name="fore"/><link name="tip"/>
  <joint name="shoulder" type="revolute"><parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1"/></joint>
  <joint name="elbow" type="revolute"><parent link="upper"/><child link="fore"/>
    <origin xyz="0.7 0 0"/><axis xyz="0 0 1"/><limit lower="-3.1" upper="3.1"/></joint>
  <joint name="tip_joint" type="fixed"><parent link="fore"/><child link="tip"/><origin xyz="0.4 0 0"/></joint>
</robot>"#;

pub fn planar_2r() -> Embodiment {
    Embodiment::arm_only(parse_urdf(PLANAR_2R, std::path::Path::new(".")).unwrap(), Transform::identity())
}

#[test]
fn planar_fk_matches_closed_form() {
    let e = planar_2r();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = random_q(&e, &mut rng);
        let (a, b) = (q.values[0], q.values[1]);
        let ee = fk(&e, &q).unwrap().ee;
        let expected = Vector3::new(0.7 * a.cos() + 0.4 * (a + b).cos(), 0.7 * a.sin() + 0.4 * (a + b).sin(), 0.0);
        assert!((ee.translation() - expected).norm() < 1e-12);
        let heading = ee.rotation_matrix()[(1, 0)].atan2(ee.rotation_matrix()[(0, 0)]);
        let wrapped = (heading - (a + b) + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        assert!(wrapped.abs() < 1e-12);
    }
}

#[test]
fn fixture_fk_matches_matrix_chain() {
    for name in ["ur6.urdf", "panda7.urdf"] {
        let e = fixture_arm(name);
        let chain = urdf_chain(&fixture(name));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q = random_q(&e, &mut rng);
            let got = fk(&e, &q).unwrap().flange.to_homogeneous();
            let want = chain_fk(&chain, &q.values);
            assert!((got - want).abs().max() < 1e-10, "{name}: {}", (got - want).abs().max());
        }
    }
}

/// Central differences of the tool position and orientation.
pub fn fd_jacobian(e: &Embodiment, q: &JointState, h: f64) -> nalgebra::Matrix6xX<f64> {
    let mut j = nalgebra::Matrix6xX::zeros(q.values.len());
    for i in 0..q.values.len() {
        let mut plus = q.clone();
        plus.values[i] += h;
        let mut minus = q.clone();
        minus.values[i] -= h;
        let (p, m) = (fk(e, &plus).unwrap().ee, fk(e, &minus).unwrap().ee);
        let lin = (p.translation() - m.translation()) / (2.0 * h);
        let ang = (p * m.inverse()).rotation_vector() / (2.0 * h);
        j.set_column(i, &nalgebra::Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z));
    }
    j
}

#[test]
fn jacobian_matches_central_differences() {
    for name in ["ur6.urdf", "panda7.urdf"] {
        let e = fixture_arm(name);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            // Keep the probes inside the limits.
            let mut q = random_q(&e, &mut rng);
            for (v, l) in q.values.iter_mut().zip(e.actuated_limits()) {
                *v = v.clamp(l[0] + 1e-5, l[1] - 1e-5);
            }
            let diff = jacobian(&e, &q).unwrap() - fd_jacobian(&e, &q, 1e-6);
            assert!(diff.abs().max() < 1e-5, "{name}: {}", diff.abs().max());
        }
    }
}

#[test]
fn ik_recovers_fk_targets() {
    let e = fixture_arm("panda7.urdf");
    let p = IkParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut solved = 0;
    for _ in 0..100 {
        let target = fk(&e, &random_q(&e, &mut rng)).unwrap().ee;
        let sol = ik_solve(&e, &target, &e.mid_range(), &p);
        let reached = fk(&e, &sol.q).unwrap().ee;
        assert!(((reached.translation() - target.translation()).norm() - sol.residual_pos).abs() < 1e-12);
        if sol.converged {
            assert!(sol.residual_pos < p.tol_pos && sol.residual_rot < p.tol_rot && sol.iters <= p.max_iters);
            solved += 1;
        }
    }
    assert!(solved >= 98, "{solved}/100");
}
