use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid SE(3) transform: a unit quaternion rotation followed by a translation in meters.
///
/// `a * b` (or [`Transform::compose`]) applies `b` first, then `a`, matching the usual
/// homogeneous-matrix product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseJson", into = "PoseJson")]
pub struct Transform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

/// On-disk form: `{"rotation": [w, x, y, z], "translation": [x, y, z]}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct PoseJson {
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<PoseJson> for Transform {
    fn from(p: PoseJson) -> Self {
        Transform::from_wxyz(p.rotation, p.translation)
    }
}

impl From<Transform> for PoseJson {
    fn from(t: Transform) -> Self {
        PoseJson {
            rotation: t.quaternion_wxyz(),
            translation: t.translation.into(),
        }
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Transform {
            rotation: renormalize(rotation.into_inner()),
            translation,
        }
    }

    /// Builds from a `(w, x, y, z)` quaternion, normalizing it. A zero quaternion maps to identity.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Self {
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        Transform {
            rotation: renormalize(quat),
            translation: Vector3::from(t),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Transform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized; a zero axis yields identity).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n * s;
        Self::from_wxyz([c, a.x, a.y, a.z], [0.0; 3])
    }

    /// URDF roll-pitch-yaw: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64, translation: [f64; 3]) -> Self {
        let r = UnitQuaternion::from_euler_angles(roll, pitch, yaw);
        Self::new(r, Vector3::from(translation))
    }

    pub fn to_rpy(&self) -> (f64, f64, f64) {
        self.rotation.euler_angles()
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(mut self, t: Vector3<f64>) -> Self {
        self.translation = t;
        self
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation as an axis-angle vector (axis scaled by angle in `[0, pi]`).
    pub fn rotation_vector(&self) -> Vector3<f64> {
        self.rotation.scaled_axis()
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: renormalize(self.rotation.quaternion() * other.rotation.quaternion()),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv = self.rotation.inverse();
        Transform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Extrinsic of a camera at `eye` looking at `target`, mapping base-frame points into the
    /// camera frame (x right, y down, z forward). `up` must not be parallel to the view ray.
    pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Transform {
        let z = (target - eye).normalize();
        let x = z.cross(up).normalize();
        let y = z.cross(&x);
        let cam_to_base = Matrix3::from_columns(&[x, y, z]);
        let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(cam_to_base.transpose()));
        Transform::new(rotation, -(rotation * eye))
    }

    /// Rotation angle between two orientations, in `[0, pi]`.
    pub fn angle_to(&self, other: &Transform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;
    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Applies `b` then `a`.
pub fn compose(a: &Transform, b: &Transform) -> Transform {
    a.compose(b)
}

pub fn invert(t: &Transform) -> Transform {
    t.inverse()
}

fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return UnitQuaternion::identity();
    }
    if n == 1.0 {
        return UnitQuaternion::new_unchecked(q);
    }
    UnitQuaternion::new_unchecked(q / n)
}
