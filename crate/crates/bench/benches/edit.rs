use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shadowkit_core::render::{render_robot, Rasterizer, ScreenVertex};
use shadowkit_core::robot_model::parse_urdf_file;
use shadowkit_core::{
    edit_frame, fk, ik_solve, CameraIntrinsics, EditConfig, Embodiment, Frame, IkParams, Image, JointState, Transform,
};

fn arm(name: &str) -> Embodiment {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    Embodiment::arm_only(parse_urdf_file(&path, None).unwrap(), Transform::identity())
}

fn camera() -> (CameraIntrinsics, Transform) {
    let k = CameraIntrinsics::new(260.0, 260.0, 120.0, 120.0, 240, 240).unwrap();
    let extr = Transform::look_at(&Vector3::new(1.4, 1.1, 1.0), &Vector3::new(0.0, 0.0, 0.4), &Vector3::z());
    (k, extr)
}

fn rasterize(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tris: Vec<[ScreenVertex; 3]> = (0..2000)
        .map(|_| {
            let (cx, cy) = (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0));
            std::array::from_fn(|_| ScreenVertex {
                x: cx + rng.random_range(-12.0..12.0),
                y: cy + rng.random_range(-12.0..12.0),
                z: rng.random_range(0.5..5.0),
            })
        })
        .collect();
    c.bench_function("rasterize_2000_tris_256px", |b| {
        b.iter(|| {
            let mut r = Rasterizer::new(256, 256);
            for (i, t) in tris.iter().enumerate() {
                r.draw_screen_triangle(t, i as u32);
            }
            black_box(r.into_buffers())
        })
    });

    let e = arm("panda7.urdf");
    let (k, extr) = camera();
    let q = e.mid_range();
    c.bench_function("render_robot_panda7_240px", |b| b.iter(|| black_box(render_robot(&e, &q, &k, &extr).unwrap())));
}

fn kinematics(c: &mut Criterion) {
    let e = arm("ur6.urdf");
    let q = JointState::new(vec![0.4, -1.1, 1.3, -0.8, -1.4, 0.3], 0.0);
    c.bench_function("fk_ur6", |b| b.iter(|| black_box(fk(&e, black_box(&q)).unwrap())));

    let target = fk(&e, &q).unwrap().ee;
    let seed = e.mid_range();
    let p = IkParams::default();
    c.bench_function("ik_ur6_cold_start", |b| b.iter(|| black_box(ik_solve(&e, &target, &seed, &p))));
}

fn compose(c: &mut Criterion) {
    let (a, v) = (arm("ur6.urdf"), arm("panda7.urdf"));
    let (k, extr) = camera();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let image = Image::from_raw(240, 240, (0..240 * 240 * 3).map(|_| rng.random()).collect()).unwrap();
    let frame = Frame::new(image, JointState::new(vec![0.4, -1.1, 1.3, -0.8, -1.4, 0.3], 0.0));
    let cfg = EditConfig::default();
    let seed = v.mid_range();
    c.bench_function("edit_frame_shadow_240px", |b| {
        b.iter(|| black_box(edit_frame(&frame, &a, &v, &extr, &extr, &k, &cfg, &seed).unwrap()))
    });
}

criterion_group!(benches, rasterize, kinematics, compose);
criterion_main!(benches);
