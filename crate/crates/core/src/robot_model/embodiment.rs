use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::urdf::parse_urdf_file;
use super::{JointKind, JointSpec, Link, ModelError, RobotModel};
use crate::geometry::Transform;

/// How a joint of the combined tree gets its displacement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Drive {
    /// Index into the actuated (arm) joint vector.
    Actuated(usize),
    /// Gripper finger joint driven by the normalized aperture.
    Finger,
    Fixed,
}

/// One joint of the combined tree, resolved to link indices, in parent-first order.
#[derive(Clone, Debug)]
pub(crate) struct PlannedJoint {
    pub parent: usize,
    pub child: usize,
    pub origin: Transform,
    pub axis: Vector3<f64>,
    pub kind: JointKind,
    pub limits: [f64; 2],
    pub drive: Drive,
}

/// An arm with an attached gripper and a tool-center-point.
///
/// The end-effector frame is `flange * mount * tcp`, where `flange` is the arm's tip link,
/// `mount` places the gripper base on the flange and `tcp` is the control point in the gripper
/// base frame.
#[derive(Clone, Debug)]
pub struct Embodiment {
    name: String,
    arm: RobotModel,
    gripper: RobotModel,
    mount: Transform,
    tcp: Transform,
    tree: RobotModel,
    flange_link: usize,
    actuated_joint_names: Vec<String>,
    finger_joint_names: Vec<String>,
    pub(crate) plan: Vec<PlannedJoint>,
    pub(crate) actuated_limits: Vec<[f64; 2]>,
    /// For each actuated joint, the plan entry that moves it.
    pub(crate) actuated_plan_index: Vec<usize>,
    /// For each actuated joint, whether it lies between the root and the flange.
    pub(crate) moves_flange: Vec<bool>,
}

/// Combines `arm` and `gripper` into one tree. Gripper names that collide with arm names get the
/// gripper model's name as a prefix.
pub fn attach_gripper(arm: RobotModel, gripper: RobotModel, mount: Transform, tcp: Transform) -> Embodiment {
    Embodiment::build(arm.name().to_string(), arm, gripper, mount, tcp)
}

impl Embodiment {
    pub fn new(name: &str, arm: RobotModel, gripper: RobotModel, mount: Transform, tcp: Transform) -> Self {
        Self::build(name.to_string(), arm, gripper, mount, tcp)
    }

    fn build(name: String, arm: RobotModel, gripper: RobotModel, mount: Transform, tcp: Transform) -> Self {
        let arm_names: HashSet<&str> = arm
            .links()
            .iter()
            .map(|l| l.name.as_str())
            .chain(arm.joints().iter().map(|j| j.name.as_str()))
            .collect();
        let rename = |n: &str| {
            if arm_names.contains(n) {
                format!("{}_{n}", gripper.name())
            } else {
                n.to_string()
            }
        };
        let mut links: Vec<Link> = arm.links().to_vec();
        let mut joints: Vec<JointSpec> = arm.joints().to_vec();
        let flange = arm.tip_link().map(str::to_string);
        let mut finger_joint_names = Vec::new();
        if let (Some(flange), Some(groot)) = (&flange, gripper.root_link()) {
            for l in gripper.links() {
                links.push(Link { name: rename(&l.name), visuals: l.visuals.clone() });
            }
            let mut mount_name = format!("{}_mount", gripper.name());
            while arm_names.contains(mount_name.as_str()) || gripper.joint(&mount_name).is_some() {
                mount_name.push('_');
            }
            joints.push(JointSpec::fixed(&mount_name, flange, &rename(groot), mount));
            for j in gripper.joints() {
                let mut j = j.clone();
                j.name = rename(&j.name);
                j.parent_link = rename(&j.parent_link);
                j.child_link = rename(&j.child_link);
                if !j.kind.is_fixed() {
                    finger_joint_names.push(j.name.clone());
                }
                joints.push(j);
            }
        }
        let tree = RobotModel::new(arm.name(), links, joints).expect("arm and renamed gripper form one tree");

        let actuated_joint_names: Vec<String> =
            arm.joints().iter().filter(|j| !j.kind.is_fixed()).map(|j| j.name.clone()).collect();
        let flange_link = flange.and_then(|f| tree.link_index(&f)).unwrap_or(0);
        let flange_chain: HashSet<usize> =
            if tree.is_empty() { HashSet::new() } else { tree.chain_to(flange_link).into_iter().collect() };

        let mut plan = Vec::with_capacity(tree.joints().len());
        let mut actuated_plan_index = vec![0; actuated_joint_names.len()];
        let mut actuated_limits = vec![[0.0; 2]; actuated_joint_names.len()];
        let mut moves_flange = vec![false; actuated_joint_names.len()];
        for &j in tree.traversal_order() {
            let spec = &tree.joints()[j];
            let drive = if spec.kind.is_fixed() {
                Drive::Fixed
            } else if let Some(i) = actuated_joint_names.iter().position(|n| *n == spec.name) {
                actuated_plan_index[i] = plan.len();
                actuated_limits[i] = spec.limits;
                moves_flange[i] = flange_chain.contains(&j);
                Drive::Actuated(i)
            } else {
                Drive::Finger
            };
            plan.push(PlannedJoint {
                parent: tree.link_index(&spec.parent_link).unwrap(),
                child: tree.link_index(&spec.child_link).unwrap(),
                origin: spec.origin,
                axis: spec.axis,
                kind: spec.kind,
                limits: spec.limits,
                drive,
            });
        }
        Embodiment {
            name,
            arm,
            gripper,
            mount,
            tcp,
            tree,
            flange_link,
            actuated_joint_names,
            finger_joint_names,
            plan,
            actuated_limits,
            actuated_plan_index,
            moves_flange,
        }
    }

    /// An arm without gripper, end-effector at the flange offset by `tcp`.
    pub fn arm_only(arm: RobotModel, tcp: Transform) -> Self {
        let name = arm.name().to_string();
        Self::build(name, arm, RobotModel::empty("none"), Transform::identity(), tcp)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arm(&self) -> &RobotModel {
        &self.arm
    }

    pub fn gripper(&self) -> &RobotModel {
        &self.gripper
    }

    pub fn mount(&self) -> &Transform {
        &self.mount
    }

    pub fn tcp(&self) -> &Transform {
        &self.tcp
    }

    /// Combined arm + gripper tree.
    pub fn tree(&self) -> &RobotModel {
        &self.tree
    }

    pub fn flange_link(&self) -> &str {
        self.tree.links().get(self.flange_link).map(|l| l.name.as_str()).unwrap_or("")
    }

    pub(crate) fn flange_index(&self) -> usize {
        self.flange_link
    }

    pub fn actuated_joint_names(&self) -> &[String] {
        &self.actuated_joint_names
    }

    pub fn finger_joint_names(&self) -> &[String] {
        &self.finger_joint_names
    }

    pub fn dof(&self) -> usize {
        self.actuated_joint_names.len()
    }

    pub fn actuated_limits(&self) -> &[[f64; 2]] {
        &self.actuated_limits
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Flange-to-end-effector offset, `mount * tcp`.
    pub fn flange_to_ee(&self) -> Transform {
        if self.gripper.is_empty() {
            self.tcp
        } else {
            self.mount * self.tcp
        }
    }

    /// Loads an arm URDF directly, or an [`EmbodimentFile`] when the path ends in `.json`.
    pub fn load(path: &Path, assets: Option<&Path>) -> Result<Self, ModelError> {
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            EmbodimentFile::load(path)?.resolve(path.parent().unwrap_or(Path::new(".")), assets)
        } else {
            Ok(Self::arm_only(parse_urdf_file(path, assets)?, Transform::identity()))
        }
    }
}

/// JSON description of an embodiment; URDF paths are relative to the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbodimentFile {
    pub name: String,
    pub arm: PathBuf,
    #[serde(default)]
    pub gripper: Option<PathBuf>,
    #[serde(default)]
    pub mount: Transform,
    #[serde(default)]
    pub tcp: Transform,
}

impl EmbodimentFile {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| ModelError::Schema(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, base: &Path, assets: Option<&Path>) -> Result<Embodiment, ModelError> {
        let arm = parse_urdf_file(&base.join(&self.arm), assets)?;
        let gripper = match &self.gripper {
            Some(g) => parse_urdf_file(&base.join(g), assets)?,
            None => RobotModel::empty("none"),
        };
        Ok(Embodiment::new(&self.name, arm, gripper, self.mount, self.tcp))
    }
}
