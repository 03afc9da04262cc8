//! Model-based robot segmentation: rasterized masks and depth from a posed embodiment.

mod buffers;
mod raster;

pub use buffers::{DepthBuffer, Mask};
pub use raster::{Rasterizer, ScreenVertex, NEAR_PLANE};

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{CameraIntrinsics, Transform};
use crate::kinematics::{fk, ForwardKinematics, JointState, KinematicsError};
use crate::robot_model::Embodiment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (u32, u32), got: (u32, u32) },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub mask: Mask,
    pub depth: DepthBuffer,
}

/// Renders the embodiment at `q` through a camera with intrinsics `k` and extrinsic `extr`
/// (robot base frame to camera frame).
pub fn render_robot(e: &Embodiment, q: &JointState, k: &CameraIntrinsics, extr: &Transform) -> Result<RenderOutput, RenderError> {
    let f = fk(e, q)?;
    let mut r = Rasterizer::new(k.width, k.height);
    draw_embodiment(&mut r, e, &f, k, extr, 0);
    let (mask, depth) = r.into_buffers();
    Ok(RenderOutput { mask, depth })
}

/// Draws every visual triangle of `e` posed by `f`; triangle ids start at `first_id`.
/// Returns the next unused id.
pub fn draw_embodiment(
    r: &mut Rasterizer,
    e: &Embodiment,
    f: &ForwardKinematics,
    k: &CameraIntrinsics,
    extr: &Transform,
    first_id: u32,
) -> u32 {
    let mut id = first_id;
    for (link, pose) in e.tree().links().iter().zip(&f.link_poses) {
        for visual in &link.visuals {
            let to_cam = *extr * *pose * visual.origin;
            let rot: Matrix3<f64> = to_cam.rotation_matrix();
            let t = *to_cam.translation();
            let cam: Vec<Vector3<f64>> = visual.mesh.vertices.iter().map(|v| rot * v + t).collect();
            for tri in &visual.mesh.triangles {
                let p = [cam[tri[0] as usize], cam[tri[1] as usize], cam[tri[2] as usize]];
                r.draw_camera_triangle(&p, k, id);
                id += 1;
            }
        }
    }
    id
}

/// Segmentation mask of the robot that is physically in the image, rendered from its measured
/// joints.
pub fn segment_robot(q: &JointState, e: &Embodiment, k: &CameraIntrinsics, extr: &Transform) -> Result<Mask, RenderError> {
    render_robot(e, q, k, extr).map(|o| o.mask)
}

/// Keeps robot pixels that are not behind scene content: `robot_depth < scene_depth + tol`.
pub fn occlusion_filter(robot_mask: &Mask, robot_depth: &DepthBuffer, scene_depth: &DepthBuffer, tol: f64) -> Result<Mask, RenderError> {
    let dims = (robot_mask.width, robot_mask.height);
    for d in [robot_depth, scene_depth] {
        if (d.width, d.height) != dims {
            return Err(RenderError::DimensionMismatch { expected: dims, got: (d.width, d.height) });
        }
    }
    let bits = robot_mask
        .bits
        .iter()
        .zip(robot_depth.values.iter().zip(&scene_depth.values))
        .map(|(&m, (&rd, &sd))| m && rd < sd + tol)
        .collect();
    Ok(Mask { width: dims.0, height: dims.1, bits })
}
