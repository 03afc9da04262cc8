//! Fixtures shared by unit tests.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::Rng;

use crate::geometry::Transform;
use crate::kinematics::JointState;
use crate::robot_model::{parse_urdf_file, Embodiment, JointKind, JointSpec, Link, RobotModel};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_arm(name: &str) -> Embodiment {
    Embodiment::arm_only(parse_urdf_file(&fixture(name), None).unwrap(), Transform::identity())
}

/// Planar arm in the xy-plane, joints about z, flange at the end of the last link.
pub fn planar_arm(lengths: &[f64]) -> RobotModel {
    let mut links = vec![Link::new("base")];
    let mut joints = Vec::new();
    let mut prev = "base".to_string();
    let mut offset = 0.0;
    for (i, l) in lengths.iter().enumerate() {
        let name = format!("link{}", i + 1);
        links.push(Link::new(&name));
        joints.push(JointSpec {
            name: format!("joint{}", i + 1),
            kind: JointKind::Revolute,
            parent_link: prev.clone(),
            child_link: name.clone(),
            origin: Transform::from_translation(offset, 0.0, 0.0),
            axis: Vector3::z(),
            limits: [-3.0, 3.0],
        });
        prev = name;
        offset = *l;
    }
    links.push(Link::new("tip"));
    joints.push(JointSpec::fixed("tip_joint", &prev, "tip", Transform::from_translation(offset, 0.0, 0.0)));
    RobotModel::new("planar", links, joints).unwrap()
}

pub fn random_q(e: &Embodiment, rng: &mut impl Rng) -> JointState {
    JointState::new(e.actuated_limits().iter().map(|l| rng.random_range(l[0]..=l[1])).collect(), 0.0)
}
