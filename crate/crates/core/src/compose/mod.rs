//! The edit itself: black out the robot in view and overlay the mask of its counterpart posed at
//! the same end-effector pose.

mod image;

pub use image::Image;

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, Transform};
use crate::kinematics::{fk, ik_solve, reexpress_ee, IkParams, JointState, KinematicsError};
use crate::render::{occlusion_filter, render_robot, DepthBuffer, Mask, RenderError};
use crate::robot_model::Embodiment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComposeError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (u32, u32), got: (u32, u32) },
    #[error("buffer holds {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("shadow mode needs a non-empty virtual embodiment")]
    EmptyVirtual,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditMode {
    #[default]
    Shadow,
    BlackOnly,
    None,
}

impl std::str::FromStr for EditMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shadow" => Ok(EditMode::Shadow),
            "black_only" => Ok(EditMode::BlackOnly),
            "none" => Ok(EditMode::None),
            other => Err(format!("unknown edit mode `{other}`")),
        }
    }
}

impl std::fmt::Display for EditMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EditMode::Shadow => "shadow",
            EditMode::BlackOnly => "black_only",
            EditMode::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditConfig {
    pub fill_color: [u8; 3],
    pub mode: EditMode,
    /// Meters; only used when the frame carries scene depth.
    pub occlusion_tolerance: f64,
    pub ik: IkParams,
}

impl Default for EditConfig {
    fn default() -> Self {
        EditConfig { fill_color: [0, 0, 0], mode: EditMode::Shadow, occlusion_tolerance: 0.01, ik: IkParams::default() }
    }
}

impl EditConfig {
    pub fn with_mode(mode: EditMode) -> Self {
        EditConfig { mode, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub image: Image,
    /// Joints of the robot physically in the image.
    pub joints: JointState,
    pub scene_depth: Option<DepthBuffer>,
    pub time_index: usize,
    pub trajectory_id: usize,
}

impl Frame {
    pub fn new(image: Image, joints: JointState) -> Self {
        Frame { image, joints, scene_depth: None, time_index: 0, trajectory_id: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeResult {
    pub edited: Image,
    pub active_mask: Mask,
    pub virtual_mask: Mask,
    /// `None` unless the mode is shadow.
    pub virtual_q: Option<JointState>,
    /// `true` when no IK was needed.
    pub ik_converged: bool,
}

impl CompositeResult {
    /// Union of the active and virtual masks.
    pub fn composite_mask(&self) -> Mask {
        self.active_mask.union(&self.virtual_mask).expect("masks share the image size")
    }
}

/// Camera and calibration shared by both robots in one edit.
#[derive(Clone, Copy, Debug)]
pub struct EditContext<'a> {
    pub source: &'a Embodiment,
    pub target: &'a Embodiment,
    pub calib_source: &'a Transform,
    pub calib_target: &'a Transform,
    pub k: &'a CameraIntrinsics,
}

/// Edits one frame. `active` is the robot in the image and `virtual_` its counterpart.
#[allow(clippy::too_many_arguments)]
pub fn edit_frame(
    frame: &Frame,
    active: &Embodiment,
    virtual_: &Embodiment,
    calib_active: &Transform,
    calib_virtual: &Transform,
    k: &CameraIntrinsics,
    cfg: &EditConfig,
    ik_seed: &JointState,
) -> Result<CompositeResult, ComposeError> {
    check_dims(frame, k)?;
    let pose = match cfg.mode {
        EditMode::Shadow => {
            if virtual_.is_empty() {
                return Err(ComposeError::EmptyVirtual);
            }
            let ee = fk(active, &frame.joints)?.ee;
            let goal = reexpress_ee(&ee, calib_active, calib_virtual);
            let sol = ik_solve(virtual_, &goal, ik_seed, &cfg.ik);
            Some((sol.q, sol.converged))
        }
        _ => None,
    };
    match pose {
        Some((q, converged)) => {
            let mut r = edit_frame_at(frame, active, virtual_, calib_active, calib_virtual, k, cfg, &q)?;
            r.ik_converged = converged;
            Ok(r)
        }
        None => edit_frame_at(frame, active, virtual_, calib_active, calib_virtual, k, cfg, &JointState::default()),
    }
}

/// Same as [`edit_frame`] with the virtual robot's joints given instead of solved for. The
/// aperture is still taken from the frame. `virtual_q` is ignored unless the mode is shadow.
#[allow(clippy::too_many_arguments)]
pub fn edit_frame_at(
    frame: &Frame,
    active: &Embodiment,
    virtual_: &Embodiment,
    calib_active: &Transform,
    calib_virtual: &Transform,
    k: &CameraIntrinsics,
    cfg: &EditConfig,
    virtual_q: &JointState,
) -> Result<CompositeResult, ComposeError> {
    let dims = check_dims(frame, k)?;
    let mut result = CompositeResult {
        edited: frame.image.clone(),
        active_mask: Mask::empty(dims.0, dims.1),
        virtual_mask: Mask::empty(dims.0, dims.1),
        virtual_q: None,
        ik_converged: true,
    };
    if cfg.mode == EditMode::None {
        return Ok(result);
    }
    let visible = |e: &Embodiment, q: &JointState, extr: &Transform| -> Result<Mask, ComposeError> {
        let out = render_robot(e, q, k, extr).map_err(|err| match err {
            RenderError::Kinematics(k) => ComposeError::Kinematics(k),
            other => ComposeError::Render(other),
        })?;
        Ok(match &frame.scene_depth {
            Some(scene) => occlusion_filter(&out.mask, &out.depth, scene, cfg.occlusion_tolerance)?,
            None => out.mask,
        })
    };
    result.active_mask = visible(active, &frame.joints, calib_active)?;
    result.edited.fill_mask(&result.active_mask, cfg.fill_color);
    if cfg.mode == EditMode::BlackOnly {
        return Ok(result);
    }
    if virtual_.is_empty() {
        return Err(ComposeError::EmptyVirtual);
    }
    let q = JointState::new(virtual_q.values.clone(), frame.joints.aperture);
    result.virtual_mask = visible(virtual_, &q, calib_virtual)?;
    result.edited.fill_mask(&result.virtual_mask, cfg.fill_color);
    result.virtual_q = Some(q);
    Ok(result)
}

fn check_dims(frame: &Frame, k: &CameraIntrinsics) -> Result<(u32, u32), ComposeError> {
    let dims = (k.width, k.height);
    if frame.image.dims() != dims {
        return Err(ComposeError::DimensionMismatch { expected: dims, got: frame.image.dims() });
    }
    if let Some(d) = &frame.scene_depth {
        if (d.width, d.height) != dims {
            return Err(ComposeError::DimensionMismatch { expected: dims, got: (d.width, d.height) });
        }
    }
    Ok(dims)
}

/// Train-time edit: the source robot is in the image, the target is overlaid.
pub fn edit_train(frame: &Frame, ctx: &EditContext, cfg: &EditConfig, ik_seed: &JointState) -> Result<CompositeResult, ComposeError> {
    edit_frame(frame, ctx.source, ctx.target, ctx.calib_source, ctx.calib_target, ctx.k, cfg, ik_seed)
}

/// Deployment-time edit: the target robot is in the image, the source is overlaid.
pub fn edit_eval(frame: &Frame, ctx: &EditContext, cfg: &EditConfig, ik_seed: &JointState) -> Result<CompositeResult, ComposeError> {
    edit_frame(frame, ctx.target, ctx.source, ctx.calib_target, ctx.calib_source, ctx.k, cfg, ik_seed)
}

#[cfg(test)]
mod tests;
