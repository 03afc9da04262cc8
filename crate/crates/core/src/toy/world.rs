use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::compose::Image;
use crate::geometry::{CameraIntrinsics, Transform};
use crate::kinematics::{fk, ik_solve, IkParams, JointState};
use crate::render::{render_robot, DepthBuffer, Mask, Rasterizer};
use crate::robot_model::{Embodiment, JointKind, JointSpec, Link, RobotModel, TriangleMesh};

/// A planar arm lying in the table plane, joints about the table normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarEmbodiment {
    pub name: String,
    pub link_lengths: Vec<f64>,
    pub link_width: f64,
    pub color: [u8; 3],
    pub joint_limits: Vec<[f64; 2]>,
    /// Tool point beyond the end of the last link, along it.
    pub tcp_offset: f64,
    /// Base position on the table.
    pub base: [f64; 2],
}

impl PlanarEmbodiment {
    /// Thick two-link arm.
    pub fn source() -> Self {
        PlanarEmbodiment {
            name: "source".into(),
            link_lengths: vec![0.45, 0.40],
            link_width: 0.07,
            color: [250, 150, 20],
            joint_limits: vec![[-1.6, 3.1], [0.05, 2.9]],
            tcp_offset: 0.02,
            base: [0.0, 0.0],
        }
    }

    /// Thin three-link arm with a long tool offset, mounted elsewhere.
    pub fn target() -> Self {
        PlanarEmbodiment {
            name: "target".into(),
            link_lengths: vec![0.40, 0.36, 0.10],
            link_width: 0.03,
            color: [30, 60, 160],
            joint_limits: vec![[-1.6, 3.1], [0.05, 2.9], [-3.1, 3.1]],
            tcp_offset: 0.10,
            base: [0.12, -0.04],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.link_lengths.len() < 2 {
            return Err(format!("{}: at least two links required", self.name));
        }
        if self.joint_limits.len() != self.link_lengths.len() {
            return Err(format!("{}: one joint limit per link required", self.name));
        }
        if !(self.link_width > 0.0) || self.link_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(format!("{}: lengths and width must be positive", self.name));
        }
        Ok(())
    }

    /// The arm as a kinematic model: one flat rectangle per link in the base xy-plane.
    pub fn to_embodiment(&self) -> Embodiment {
        let mut links = vec![Link::new("base")];
        let mut joints = Vec::new();
        let mut prev = "base".to_string();
        let mut offset = 0.0;
        for (i, (&len, lim)) in self.link_lengths.iter().zip(&self.joint_limits).enumerate() {
            let name = format!("link{}", i + 1);
            links.push(Link::new(&name).with_visual(flat_rect(len, self.link_width), Transform::identity()));
            joints.push(JointSpec {
                name: format!("joint{}", i + 1),
                kind: JointKind::Revolute,
                parent_link: prev.clone(),
                child_link: name.clone(),
                origin: Transform::from_translation(offset, 0.0, 0.0),
                axis: Vector3::z(),
                limits: *lim,
            });
            prev = name;
            offset = len;
        }
        links.push(Link::new("flange"));
        joints.push(JointSpec::fixed("flange_joint", &prev, "flange", Transform::from_translation(offset, 0.0, 0.0)));
        let model = RobotModel::new(&self.name, links, joints).expect("planar chain is a valid tree");
        Embodiment::arm_only(model, Transform::from_translation(self.tcp_offset, 0.0, 0.0))
    }

    pub fn base_pose(&self) -> Transform {
        Transform::from_translation(self.base[0], self.base[1], 0.0)
    }
}

/// Rectangle from the joint along +x, centered on the link axis, in the z = 0 plane.
fn flat_rect(length: f64, width: f64) -> TriangleMesh {
    let h = width / 2.0;
    let v = vec![
        Vector3::new(0.0, -h, 0.0),
        Vector3::new(length, -h, 0.0),
        Vector3::new(length, h, 0.0),
        Vector3::new(0.0, h, 0.0),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("valid rectangle")
}

/// Block and goal on the table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyScene {
    pub block: [f64; 2],
    pub goal: [f64; 2],
    pub half_size: f64,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bounds: [f64; 4],
}

impl ToyScene {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let b = self.bounds;
        p[0] >= b[0] && p[0] <= b[2] && p[1] >= b[1] && p[1] <= b[3]
    }

    pub fn block_to_goal(&self) -> f64 {
        (Vector2::from(self.block) - Vector2::from(self.goal)).norm()
    }

    pub fn solved(&self) -> bool {
        self.block_to_goal() <= self.half_size
    }

    pub fn clamp(&self, p: Vector2<f64>) -> Vector2<f64> {
        let b = self.bounds;
        Vector2::new(p.x.clamp(b[0], b[2]), p.y.clamp(b[1], b[3]))
    }
}

/// Colors and the overhead camera shared by every toy render.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyWorld {
    pub k: CameraIntrinsics,
    /// Camera height above the table; the camera looks straight down.
    pub height: f64,
    /// Table point under the optical center.
    pub center: [f64; 2],
    pub background: [u8; 3],
    pub block_color: [u8; 3],
    pub goal_color: [u8; 3],
}

impl Default for ToyWorld {
    fn default() -> Self {
        // 96 pixels span 1 m of table.
        let (px, height) = (96, 2.0);
        let f = f64::from(px) * height / 1.0;
        ToyWorld {
            k: CameraIntrinsics::new(f, f, f64::from(px) / 2.0, f64::from(px) / 2.0, px, px).expect("valid intrinsics"),
            height,
            center: [0.0, 0.42],
            background: [200, 200, 200],
            block_color: [210, 40, 40],
            goal_color: [120, 220, 120],
        }
    }
}

impl ToyWorld {
    /// Maps table points into the camera frame.
    pub fn camera(&self) -> Transform {
        let c = Vector3::new(self.center[0], self.center[1], 0.0);
        Transform::look_at(&(c + Vector3::new(0.0, 0.0, self.height)), &c, &Vector3::y())
    }

    /// Extrinsic of an arm: its base frame into the camera frame.
    pub fn calibration(&self, arm: &PlanarEmbodiment) -> Transform {
        self.camera() * arm.base_pose()
    }

    /// Meters of table per pixel.
    pub fn pixel_pitch(&self) -> f64 {
        self.height / self.k.fx
    }

    fn square_mask(&self, center: [f64; 2], half: f64) -> Mask {
        let cam = self.camera();
        let c = |dx: f64, dy: f64| cam.transform_point(&Vector3::new(center[0] + dx, center[1] + dy, 0.0));
        let corners = [c(-half, -half), c(half, -half), c(half, half), c(-half, half)];
        let mut r = Rasterizer::new(self.k.width, self.k.height);
        r.draw_camera_triangle(&[corners[0], corners[1], corners[2]], &self.k, 0);
        r.draw_camera_triangle(&[corners[0], corners[2], corners[3]], &self.k, 1);
        r.mask()
    }
}

/// Output of [`render_toy`].
#[derive(Clone, Debug, PartialEq)]
pub struct ToyRender {
    pub image: Image,
    pub arm_mask: Mask,
    pub scene_depth: DepthBuffer,
}

/// Draws goal, then block, then the arm on top. The arm mask comes from the same renderer the
/// edit uses, so it is exact.
pub fn render_toy(world: &ToyWorld, scene: &ToyScene, arm: &ToyArm, q: &JointState) -> ToyRender {
    let k = &world.k;
    let mut image = Image::filled(k.width, k.height, world.background);
    image.fill_mask(&world.square_mask(scene.goal, scene.half_size), world.goal_color);
    image.fill_mask(&world.square_mask(scene.block, scene.half_size), world.block_color);
    let arm_mask = if arm.embodiment.is_empty() {
        Mask::empty(k.width, k.height)
    } else {
        render_robot(&arm.embodiment, q, k, &arm.calibration).expect("toy joints within limits").mask
    };
    image.fill_mask(&arm_mask, arm.spec.color);
    ToyRender { image, arm_mask, scene_depth: DepthBuffer::filled(k.width, k.height, world.height) }
}

/// A planar arm ready to simulate: its model, calibration and IK settings.
#[derive(Clone, Debug)]
pub struct ToyArm {
    pub spec: PlanarEmbodiment,
    pub embodiment: Embodiment,
    pub calibration: Transform,
    pub ik: IkParams,
}

/// Tight tolerances so both edit directions land on the same joint values to rounding.
pub fn toy_ik_params() -> IkParams {
    IkParams { tol_pos: 1e-10, tol_rot: 1e-10, ..IkParams::default() }
}

impl ToyArm {
    pub fn new(world: &ToyWorld, spec: PlanarEmbodiment) -> Self {
        ToyArm { embodiment: spec.to_embodiment(), calibration: world.calibration(&spec), spec, ik: toy_ik_params() }
    }

    /// Tool point on the table.
    pub fn ee_position(&self, q: &JointState) -> Vector2<f64> {
        let ee = self.spec.base_pose() * fk(&self.embodiment, q).expect("toy joints within limits").ee;
        Vector2::new(ee.translation().x, ee.translation().y)
    }

    /// Tool pose on the table.
    pub fn ee_pose(&self, q: &JointState) -> Transform {
        self.spec.base_pose() * fk(&self.embodiment, q).expect("toy joints within limits").ee
    }

    /// Joints reaching the table pose `pose`, warm-started from `seed`. Returns the best effort
    /// and whether it converged.
    pub fn reach(&self, pose: &Transform, seed: &JointState) -> (JointState, bool) {
        let local = self.spec.base_pose().inverse() * *pose;
        let sol = ik_solve(&self.embodiment, &local, seed, &self.ik);
        (sol.q, sol.converged)
    }
}

/// Two-link inverse kinematics on the positive elbow branch; the tool offset extends the
/// second link. Returns the table-frame tool pose whose heading the arm naturally has at `p`.
pub fn natural_pose(arm: &PlanarEmbodiment, p: Vector2<f64>) -> Transform {
    assert_eq!(arm.link_lengths.len(), 2, "natural pose is defined for two-link arms");
    let (l1, l2) = (arm.link_lengths[0], arm.link_lengths[1] + arm.tcp_offset);
    let d = p - Vector2::from(arm.base);
    let c2 = ((d.norm_squared() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q2 = c2.acos().max(arm.joint_limits[1][0]);
    let q1 = d.y.atan2(d.x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Transform::from_axis_angle(&Vector3::z(), q1 + q2).with_translation(Vector3::new(p.x, p.y, 0.0))
}
