use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GeometryError, Transform};

/// One camera calibrated against one or more robot bases.
///
/// Each extrinsic maps points expressed in that robot's base frame into the camera frame
/// (`p_cam = T * p_base`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: BTreeMap<String, Transform>,
}

impl Calibration {
    pub fn extrinsic(&self, robot: &str) -> Result<&Transform, GeometryError> {
        self.extrinsics
            .get(robot)
            .ok_or_else(|| GeometryError::UnknownRobot(robot.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let calib: Calibration = serde_json::from_str(text)?;
        calib.intrinsics.validate()?;
        Ok(calib)
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = fs::read_to_string(path).map_err(|e| GeometryError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }
}
