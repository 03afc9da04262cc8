//! Independent reference implementations and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::Rng;

use shadowkit_core::robot_model::parse_urdf_file;
use shadowkit_core::toy::{write_dataset, ToyConfig, ToySetup};
use shadowkit_core::{Embodiment, JointState, Transform};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_arm(name: &str) -> Embodiment {
    Embodiment::arm_only(parse_urdf_file(&fixture(name), None).unwrap(), Transform::identity())
}

pub fn random_q(e: &Embodiment, rng: &mut impl Rng) -> JointState {
    JointState::new(e.actuated_limits().iter().map(|l| rng.random_range(l[0]..=l[1])).collect(), 0.0)
}

// ---------------------------------------------------------------------------------------------
// Rasterization oracle

/// Screen-space triangle with per-vertex depth.
pub type ScreenTri = [[f64; 3]; 3];

/// Pixel centers inside any triangle, by direct barycentric evaluation at every pixel.
pub fn coverage_oracle(tris: &[ScreenTri], width: u32, height: u32) -> Vec<bool> {
    let mut out = vec![false; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            let p = [f64::from(x) + 0.5, f64::from(y) + 0.5];
            out[(y * width + x) as usize] = tris.iter().any(|t| barycentric(t, p).is_some_and(|b| b.iter().all(|&w| w >= 0.0)));
        }
    }
    out
}

/// Nearest perspective-correct depth per pixel, infinity where uncovered.
pub fn depth_oracle(tris: &[ScreenTri], width: u32, height: u32) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            let p = [f64::from(x) + 0.5, f64::from(y) + 0.5];
            for t in tris {
                if let Some(b) = barycentric(t, p).filter(|b| b.iter().all(|&w| w >= 0.0)) {
                    let z = 1.0 / (b[0] / t[0][2] + b[1] / t[1][2] + b[2] / t[2][2]);
                    let i = (y * width + x) as usize;
                    out[i] = out[i].min(z);
                }
            }
        }
    }
    out
}

fn barycentric(t: &ScreenTri, p: [f64; 2]) -> Option<[f64; 3]> {
    let m = Matrix3::new(t[0][0], t[1][0], t[2][0], t[0][1], t[1][1], t[2][1], 1.0, 1.0, 1.0);
    let b = m.try_inverse()? * Vector3::new(p[0], p[1], 1.0);
    Some([b.x, b.y, b.z])
}

// ---------------------------------------------------------------------------------------------
// Kinematics oracle

pub struct ChainJoint {
    pub origin: Matrix4<f64>,
    pub axis: Vector3<f64>,
    pub revolute: bool,
}

/// Serial chain from the URDF root to its deepest link, read straight from the XML.
pub fn urdf_chain(path: &Path) -> Vec<ChainJoint> {
    let text = std::fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let joints: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("joint")).collect();
    let attr_vec = |n: Option<roxmltree::Node>, name: &str, default: [f64; 3]| -> [f64; 3] {
        match n.and_then(|n| n.attribute(name)) {
            Some(s) => {
                let v: Vec<f64> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            }
            None => default,
        }
    };
    let children: Vec<&str> = joints.iter().map(|j| child_of(j, "child").unwrap().attribute("link").unwrap()).collect();
    let mut link = doc
        .descendants()
        .filter(|n| n.has_tag_name("link"))
        .map(|n| n.attribute("name").unwrap())
        .find(|l| !children.contains(l))
        .unwrap()
        .to_string();
    let mut chain = Vec::new();
    while let Some(j) = joints.iter().find(|j| child_of(j, "parent").unwrap().attribute("link") == Some(link.as_str())) {
        let origin = child_of(j, "origin");
        let xyz = attr_vec(origin, "xyz", [0.0; 3]);
        let rpy = attr_vec(origin, "rpy", [0.0; 3]);
        let axis = attr_vec(child_of(j, "axis"), "xyz", [1.0, 0.0, 0.0]);
        let kind = j.attribute("type").unwrap();
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rpy_matrix(rpy));
        m[(0, 3)] = xyz[0];
        m[(1, 3)] = xyz[1];
        m[(2, 3)] = xyz[2];
        chain.push(ChainJoint { origin: m, axis: Vector3::from(axis).normalize(), revolute: kind == "revolute" || kind == "continuous" });
        if kind == "fixed" {
            chain.last_mut().unwrap().axis = Vector3::zeros();
        }
        link = child_of(j, "child").unwrap().attribute("link").unwrap().to_string();
    }
    chain
}

fn child_of<'a, 'input>(n: &roxmltree::Node<'a, 'input>, tag: &str) -> Option<roxmltree::Node<'a, 'input>> {
    n.children().find(|c| c.has_tag_name(tag))
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rpy_matrix(rpy: [f64; 3]) -> Matrix3<f64> {
    rot_z(rpy[2]) * rot_y(rpy[1]) * rot_x(rpy[0])
}

/// Rodrigues' formula.
pub fn axis_angle_matrix(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Product of homogeneous matrices down the chain. Fixed joints consume no joint value.
pub fn chain_fk(chain: &[ChainJoint], q: &[f64]) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    let mut i = 0;
    for j in chain {
        t *= j.origin;
        if j.axis == Vector3::zeros() {
            continue;
        }
        let mut motion = Matrix4::identity();
        if j.revolute {
            motion.fixed_view_mut::<3, 3>(0, 0).copy_from(&axis_angle_matrix(&j.axis, q[i]));
        } else {
            motion.fixed_view_mut::<3, 1>(0, 3).copy_from(&(j.axis * q[i]));
        }
        t *= motion;
        i += 1;
    }
    t
}

// ---------------------------------------------------------------------------------------------
// Toy dataset

pub fn toy_dataset(root: &Path, trajs: usize, frames: usize) -> PathBuf {
    write_dataset(&ToySetup::new(&ToyConfig::default()), root, trajs, frames).unwrap()
}

/// Every file under `root`, relative path to contents.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// `report.json` with the wall-clock section removed.
pub fn report_without_timing(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}
