//! Robot segmentation-mask data editing for cross-embodiment policy transfer.
//!
//! A policy trained on one robot sees every robot in its observations replaced by the union of
//! two rendered masks: the robot that is physically present and a virtual counterpart posed at
//! the same end-effector pose. The same edit applied at deployment time on another robot yields
//! matching observations.

pub mod compose;
pub mod geometry;
pub mod kinematics;
pub mod pipeline;
pub mod render;
pub mod robot_model;
pub mod toy;

#[cfg(test)]
mod test_support;

pub use compose::{edit_eval, edit_frame, edit_frame_at, edit_train, CompositeResult, EditConfig, EditMode, Frame, Image};
pub use geometry::{CalibrationNoiseSpec, CameraIntrinsics, Transform};
pub use kinematics::{fk, ik_solve, jacobian, reexpress_ee, IkParams, IkSolution, JointState};
pub use robot_model::{attach_gripper, Embodiment, RobotModel, TriangleMesh};
