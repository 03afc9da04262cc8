use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Transform;

/// Zero-mean Gaussian error added to a camera extrinsic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationNoiseSpec {
    /// Per-axis translation std dev, meters.
    pub sigma_translation: f64,
    /// Std dev of the rotation angle, radians. The axis is uniform on the sphere.
    pub sigma_rotation: f64,
    pub seed: u64,
}

impl CalibrationNoiseSpec {
    pub fn is_zero(&self) -> bool {
        self.sigma_translation == 0.0 && self.sigma_rotation == 0.0
    }

    /// Same seed, sigmas multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CalibrationNoiseSpec {
            sigma_translation: self.sigma_translation * factor,
            sigma_rotation: self.sigma_rotation * factor,
            seed: self.seed,
        }
    }
}

/// Draws one camera-side perturbation `delta` (so the result is `delta * t`).
///
/// The draw order is fixed, so specs that differ only in sigma share one direction of error.
pub fn sample_extrinsic_error(spec: &CalibrationNoiseSpec) -> Transform {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
    let dt = Vector3::new(n(), n(), n()) * spec.sigma_translation;
    let axis = Vector3::new(n(), n(), n());
    let angle = n() * spec.sigma_rotation;
    Transform::from_axis_angle(&axis, angle).with_translation(dt)
}

/// Adds calibration error to `t`: translation jitter per axis and a rotation about a random axis,
/// both expressed in the camera frame. Deterministic in `spec.seed`.
pub fn perturb_extrinsics(t: &Transform, spec: &CalibrationNoiseSpec) -> Transform {
    if spec.is_zero() {
        return *t;
    }
    let delta = sample_extrinsic_error(spec);
    let rotated = if spec.sigma_rotation > 0.0 {
        Transform::from_rotation(*delta.rotation()) * *t
    } else {
        *t
    };
    rotated.with_translation(rotated.translation() + delta.translation())
}
