//! Rigid transforms, pinhole projection, calibration files and calibration noise.

mod calibration;
mod camera;
mod noise;
mod transform;

pub use calibration::Calibration;
pub use camera::{project, unproject, BehindCamera, CameraIntrinsics, MIN_PROJECTABLE_DEPTH};
pub use noise::{perturb_extrinsics, sample_extrinsic_error, CalibrationNoiseSpec};
pub use transform::{compose, invert, Transform};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid camera intrinsics {0:?}")]
    InvalidIntrinsics(CameraIntrinsics),
    #[error("calibration has no extrinsics for robot `{0}`")]
    UnknownRobot(String),
    #[error("reading {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("calibration json: {0}")]
    Json(#[from] serde_json::Error),
}
