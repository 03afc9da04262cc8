use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Points closer than this to the image plane cannot be projected.
pub const MIN_PROJECTABLE_DEPTH: f64 = 1e-9;

/// Pinhole intrinsics in pixels. Images are assumed rectified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("point is behind the camera")]
pub struct BehindCamera;

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = CameraIntrinsics { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 || self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(*self));
        }
        Ok(())
    }

    /// Same camera at `factor` times the resolution (pixel centers stay consistent).
    pub fn scaled(&self, factor: u32) -> Self {
        let f = f64::from(factor);
        CameraIntrinsics {
            fx: self.fx * f,
            fy: self.fy * f,
            cx: self.cx * f,
            cy: self.cy * f,
            width: self.width * factor,
            height: self.height * factor,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project(p_cam: &Vector3<f64>, k: &CameraIntrinsics) -> Result<(f64, f64), BehindCamera> {
    if !(p_cam.z > MIN_PROJECTABLE_DEPTH) {
        return Err(BehindCamera);
    }
    Ok((k.fx * p_cam.x / p_cam.z + k.cx, k.fy * p_cam.y / p_cam.z + k.cy))
}

/// Inverse of [`project`] at a known depth.
pub fn unproject(u: f64, v: f64, z: f64, k: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z)
}
