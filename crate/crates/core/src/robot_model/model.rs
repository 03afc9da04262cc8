use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector3;

use super::{ModelError, TriangleMesh};
use crate::geometry::Transform;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn is_fixed(self) -> bool {
        self == JointKind::Fixed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent_link: String,
    pub child_link: String,
    /// Parent link frame to joint frame at zero displacement.
    pub origin: Transform,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    /// `[lo, hi]` in radians or meters.
    pub limits: [f64; 2],
}

impl JointSpec {
    pub fn fixed(name: &str, parent: &str, child: &str, origin: Transform) -> Self {
        JointSpec {
            name: name.into(),
            kind: JointKind::Fixed,
            parent_link: parent.into(),
            child_link: child.into(),
            origin,
            axis: Vector3::z(),
            limits: [0.0, 0.0],
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.limits[0] + self.limits[1])
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |why: &str| Err(ModelError::InvalidJoint(self.name.clone(), why.to_string()));
        if !(self.limits[0] <= self.limits[1]) {
            return bad("lower limit exceeds upper limit");
        }
        if !self.kind.is_fixed() && (self.axis.norm() - 1.0).abs() > 1e-9 {
            return bad("axis is not unit length");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Visual {
    pub mesh: Arc<TriangleMesh>,
    /// Link frame to mesh frame.
    pub origin: Transform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub visuals: Vec<Visual>,
}

impl Link {
    pub fn new(name: &str) -> Self {
        Link { name: name.into(), visuals: Vec::new() }
    }

    pub fn with_visual(mut self, mesh: TriangleMesh, origin: Transform) -> Self {
        self.visuals.push(Visual { mesh: Arc::new(mesh), origin });
        self
    }
}

/// A validated kinematic tree: every non-root link has exactly one parent joint.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<JointSpec>,
    root_link: Option<usize>,
    /// Joint indices ordered parent before child.
    order: Vec<usize>,
    link_index: HashMap<String, usize>,
    parent_joint: Vec<Option<usize>>,
}

impl RobotModel {
    pub fn new(name: &str, links: Vec<Link>, joints: Vec<JointSpec>) -> Result<Self, ModelError> {
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(ModelError::InvalidTree(format!("duplicate link `{}`", l.name)));
            }
        }
        let mut joint_names = HashMap::new();
        let mut parent_joint = vec![None; links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (j, joint) in joints.iter().enumerate() {
            joint.validate()?;
            if joint_names.insert(joint.name.clone(), j).is_some() {
                return Err(ModelError::InvalidTree(format!("duplicate joint `{}`", joint.name)));
            }
            let lookup = |n: &str| {
                link_index
                    .get(n)
                    .copied()
                    .ok_or_else(|| ModelError::InvalidTree(format!("joint `{}` references unknown link `{n}`", joint.name)))
            };
            let p = lookup(&joint.parent_link)?;
            let c = lookup(&joint.child_link)?;
            children[p].push(j);
            if parent_joint[c].is_some() {
                if reaches(&joints, &link_index, c, p) {
                    return Err(ModelError::CyclicKinematics(joint.name.clone()));
                }
                return Err(ModelError::InvalidTree(format!("link `{}` has more than one parent", joint.child_link)));
            }
            parent_joint[c] = Some(j);
        }
        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        let root_link = match roots.as_slice() {
            [] if links.is_empty() => None,
            [] => return Err(ModelError::CyclicKinematics(joints.first().map(|j| j.name.clone()).unwrap_or_default())),
            [r] => Some(*r),
            _ => {
                let names: Vec<&str> = roots.iter().map(|&r| links[r].name.as_str()).collect();
                return Err(ModelError::InvalidTree(format!("multiple root links {names:?}")));
            }
        };
        let mut order = Vec::with_capacity(joints.len());
        if let Some(r) = root_link {
            let mut stack = vec![r];
            while let Some(l) = stack.pop() {
                for &j in children[l].iter().rev() {
                    order.push(j);
                    stack.push(link_index[&joints[j].child_link]);
                }
            }
        }
        if order.len() != joints.len() {
            // Some link is unreachable from the root; with one parent each that means a cycle.
            let stray = (0..joints.len()).find(|j| !order.contains(j)).unwrap();
            return Err(ModelError::CyclicKinematics(joints[stray].name.clone()));
        }
        Ok(RobotModel { name: name.into(), links, joints, root_link, order, link_index, parent_joint })
    }

    /// A model with no links, used for "no gripper".
    pub fn empty(name: &str) -> Self {
        RobotModel::new(name, Vec::new(), Vec::new()).expect("empty model is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn root_link(&self) -> Option<&str> {
        self.root_link.map(|i| self.links[i].name.as_str())
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn joint(&self, name: &str) -> Option<&JointSpec> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Joint indices in parent-before-child order.
    pub fn traversal_order(&self) -> &[usize] {
        &self.order
    }

    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn triangle_count(&self) -> usize {
        self.links.iter().flat_map(|l| &l.visuals).map(|v| v.mesh.triangles.len()).sum()
    }

    /// Depth (joint count from the root) of every link.
    pub fn link_depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.links.len()];
        for &j in &self.order {
            let p = self.link_index[&self.joints[j].parent_link];
            let c = self.link_index[&self.joints[j].child_link];
            depth[c] = depth[p] + 1;
        }
        depth
    }

    /// The deepest leaf link, ties going to the one declared last. This is the default flange.
    pub fn tip_link(&self) -> Option<&str> {
        let depth = self.link_depths();
        (0..self.links.len())
            .filter(|&l| !self.joints.iter().any(|j| j.parent_link == self.links[l].name))
            .max_by_key(|&l| (depth[l], l))
            .map(|l| self.links[l].name.as_str())
    }

    /// Joint indices from the root down to `link`.
    pub fn chain_to(&self, link: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = link;
        while let Some(j) = self.parent_joint[cur] {
            chain.push(j);
            cur = self.link_index[&self.joints[j].parent_link];
        }
        chain.reverse();
        chain
    }
}

fn reaches(joints: &[JointSpec], index: &HashMap<String, usize>, from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; index.len()];
    while let Some(l) = stack.pop() {
        if l == to {
            return true;
        }
        if std::mem::replace(&mut seen[l], true) {
            continue;
        }
        for j in joints.iter().filter(|j| index.get(&j.parent_link) == Some(&l)) {
            if let Some(&c) = index.get(&j.child_link) {
                stack.push(c);
            }
        }
    }
    false
}
