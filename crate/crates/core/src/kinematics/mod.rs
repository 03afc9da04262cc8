//! Forward kinematics, geometric Jacobians and damped-least-squares inverse kinematics.

use nalgebra::{DVector, Matrix6, Matrix6xX, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Transform;
use crate::robot_model::{Drive, Embodiment, JointKind};

/// Slack allowed when checking a joint value against its limits.
pub const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("joint `{joint}` value {value} outside [{lo}, {hi}]")]
    JointOutOfRange { joint: String, value: f64, lo: f64, hi: f64 },
    #[error("gripper aperture {0} outside [0, 1]")]
    ApertureOutOfRange(f64),
}

/// Actuated joint values (ordered as [`Embodiment::actuated_joint_names`]) plus the normalized
/// gripper opening.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub values: Vec<f64>,
    #[serde(default)]
    pub aperture: f64,
}

impl JointState {
    pub fn new(values: Vec<f64>, aperture: f64) -> Self {
        JointState { values, aperture }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Embodiment {
    /// Every joint at the middle of its range, gripper half open.
    pub fn mid_range(&self) -> JointState {
        JointState::new(self.actuated_limits().iter().map(|l| 0.5 * (l[0] + l[1])).collect(), 0.5)
    }

    pub fn clamp(&self, q: &JointState) -> JointState {
        let values = q
            .values
            .iter()
            .zip(self.actuated_limits())
            .map(|(&v, l)| if v.is_nan() { 0.5 * (l[0] + l[1]) } else { v.clamp(l[0], l[1]) })
            .collect();
        JointState::new(values, if q.aperture.is_nan() { 0.0 } else { q.aperture.clamp(0.0, 1.0) })
    }

    pub fn check(&self, q: &JointState) -> Result<(), KinematicsError> {
        if q.values.len() != self.dof() {
            return Err(KinematicsError::JointCountMismatch { expected: self.dof(), got: q.values.len() });
        }
        for ((v, l), name) in q.values.iter().zip(self.actuated_limits()).zip(self.actuated_joint_names()) {
            if !(*v >= l[0] - LIMIT_SLACK && *v <= l[1] + LIMIT_SLACK) {
                return Err(KinematicsError::JointOutOfRange { joint: name.clone(), value: *v, lo: l[0], hi: l[1] });
            }
        }
        if !(0.0..=1.0).contains(&q.aperture) {
            return Err(KinematicsError::ApertureOutOfRange(q.aperture));
        }
        Ok(())
    }
}

/// Poses of every link of [`Embodiment::tree`] in the base frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardKinematics {
    pub link_poses: Vec<Transform>,
    pub flange: Transform,
    pub ee: Transform,
}

impl ForwardKinematics {
    pub fn link_pose(&self, e: &Embodiment, link: &str) -> Option<Transform> {
        e.tree().link_index(link).map(|i| self.link_poses[i])
    }
}

fn joint_motion(kind: JointKind, axis: &Vector3<f64>, value: f64) -> Transform {
    match kind {
        JointKind::Revolute => Transform::from_axis_angle(axis, value),
        JointKind::Prismatic => Transform::from_translation(axis.x * value, axis.y * value, axis.z * value),
        JointKind::Fixed => Transform::identity(),
    }
}

/// Forward kinematics by tree traversal. The end-effector is `flange * mount * tcp`.
pub fn fk(e: &Embodiment, q: &JointState) -> Result<ForwardKinematics, KinematicsError> {
    e.check(q)?;
    Ok(fk_unchecked(e, q))
}

pub(crate) fn fk_unchecked(e: &Embodiment, q: &JointState) -> ForwardKinematics {
    let mut poses = vec![Transform::identity(); e.tree().links().len()];
    for pj in &e.plan {
        let value = match pj.drive {
            Drive::Actuated(i) => q.values[i],
            Drive::Finger => pj.limits[0] + q.aperture * (pj.limits[1] - pj.limits[0]),
            Drive::Fixed => 0.0,
        };
        let frame = poses[pj.parent] * pj.origin;
        poses[pj.child] = if pj.kind.is_fixed() { frame } else { frame * joint_motion(pj.kind, &pj.axis, value) };
    }
    let flange = poses.get(e.flange_index()).copied().unwrap_or_default();
    let ee = flange * e.flange_to_ee();
    ForwardKinematics { link_poses: poses, flange, ee }
}

/// Geometric Jacobian of the end-effector point: rows are (linear; angular) velocity in the base
/// frame, columns follow the actuated joints.
pub fn jacobian(e: &Embodiment, q: &JointState) -> Result<Matrix6xX<f64>, KinematicsError> {
    e.check(q)?;
    let f = fk_unchecked(e, q);
    Ok(jacobian_at(e, &f))
}

fn jacobian_at(e: &Embodiment, f: &ForwardKinematics) -> Matrix6xX<f64> {
    let mut jac = Matrix6xX::zeros(e.dof());
    let p_ee = f.ee.translation();
    for i in 0..e.dof() {
        if !e.moves_flange[i] {
            continue;
        }
        let pj = &e.plan[e.actuated_plan_index[i]];
        let frame = f.link_poses[pj.parent] * pj.origin;
        let z = frame.transform_vector(&pj.axis);
        let col = match pj.kind {
            JointKind::Revolute => {
                let lin = z.cross(&(p_ee - frame.translation()));
                Vector6::new(lin.x, lin.y, lin.z, z.x, z.y, z.z)
            }
            JointKind::Prismatic => Vector6::new(z.x, z.y, z.z, 0.0, 0.0, 0.0),
            JointKind::Fixed => Vector6::zeros(),
        };
        jac.set_column(i, &col);
    }
    jac
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    /// Damping factor lambda.
    pub damping: f64,
    pub tol_pos: f64,
    pub tol_rot: f64,
    pub max_iters: usize,
    pub step_scale: f64,
    /// Weight of the orientation rows of the task. `0` solves for position only, and the
    /// rotation tolerance is then not required for convergence.
    #[serde(default = "default_weight")]
    pub orientation_weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams { damping: 0.05, tol_pos: 1e-4, tol_rot: 1e-3, max_iters: 200, step_scale: 0.5, orientation_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: JointState,
    pub converged: bool,
    pub iters: usize,
    pub residual_pos: f64,
    pub residual_rot: f64,
}

/// Pose error as a twist: position difference and the axis-angle of `R_target * R(q)^-1`.
fn pose_error(target: &Transform, current: &Transform) -> Vector6<f64> {
    let dp = target.translation() - current.translation();
    let dr = (target.rotation() * current.rotation().inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

const RESTART_SEED: u64 = 0x5eed;
const STALL_WINDOW: usize = 3;
const STALL_RATIO: f64 = 0.9;
const MIN_DAMPING: f64 = 1e-3;

struct Residual {
    task: Vector6<f64>,
    pos: f64,
    rot: f64,
}

impl Residual {
    fn at(e: &Embodiment, target: &Transform, q: &JointState, w: f64) -> (Self, ForwardKinematics) {
        let f = fk_unchecked(e, q);
        let mut task = pose_error(target, &f.ee);
        let pos = task.fixed_rows::<3>(0).norm();
        let rot = task.fixed_rows::<3>(3).norm();
        for r in 3..6 {
            task[r] *= w;
        }
        (Residual { task, pos, rot }, f)
    }

    fn norm(&self) -> f64 {
        self.task.norm()
    }
}

/// Damped least squares: `q <- clamp(q + s * J^T (J J^T + lambda^2 I)^-1 e(q))` until both
/// residuals are under tolerance or `max_iters` steps were taken. Non-convergence is reported,
/// not raised. The gripper aperture is carried over from `seed`.
///
/// Three guards sit on top of the plain step. Joints pinned at a limit and pushed outward drop
/// out of the Jacobian and the step is re-solved. A step that raises the error is rejected and
/// the damping grows; accepted steps shrink it back toward `MIN_DAMPING`. When the error stalls
/// the solver restarts from a uniformly drawn configuration (fixed-seed, so results are
/// deterministic). Every trial step counts against `max_iters`, and the best iterate is returned.
pub fn ik_solve(e: &Embodiment, target: &Transform, seed: &JointState, p: &IkParams) -> IkSolution {
    let mut q = if seed.values.len() == e.dof() { e.clamp(seed) } else { e.mid_range() };
    let w = p.orientation_weight;
    let limits = e.actuated_limits();
    let done = |r: &Residual| r.pos < p.tol_pos && (w == 0.0 || r.rot < p.tol_rot);
    let (mut res, mut f) = Residual::at(e, target, &q, w);
    let mut best = (q.clone(), res.pos, res.rot, res.norm());
    let mut lambda = p.damping;
    let mut history: Vec<f64> = Vec::new();
    let mut rng: Option<ChaCha8Rng> = None;
    let mut iters = 0;
    loop {
        if res.norm() < best.3 {
            best = (q.clone(), res.pos, res.rot, res.norm());
        }
        if done(&res) {
            return IkSolution { q, converged: true, iters, residual_pos: res.pos, residual_rot: res.rot };
        }
        if iters >= p.max_iters || e.dof() == 0 {
            let (q, residual_pos, residual_rot, _) = best;
            return IkSolution { q, converged: false, iters, residual_pos, residual_rot };
        }
        history.push(res.norm());
        let n = history.len();
        if n > STALL_WINDOW && history[n - 1] > STALL_RATIO * history[n - 1 - STALL_WINDOW] {
            let rng = rng.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(RESTART_SEED));
            let values = limits.iter().map(|l| rng.random_range(l[0]..=l[1])).collect();
            q = JointState::new(values, q.aperture);
            (res, f) = Residual::at(e, target, &q, w);
            lambda = p.damping;
            history.clear();
            continue;
        }
        let mut jac = jacobian_at(e, &f);
        for r in 3..6 {
            jac.row_mut(r).scale_mut(w);
        }
        let Some(dq) = limited_step(&mut jac, &res.task, &q, limits, lambda, p.step_scale) else {
            let (q, residual_pos, residual_rot, _) = best;
            return IkSolution { q, converged: false, iters, residual_pos, residual_rot };
        };
        let mut cand = q.clone();
        for (v, d) in cand.values.iter_mut().zip(dq.iter()) {
            *v += d;
        }
        cand = e.clamp(&cand);
        iters += 1;
        let (cres, cf) = Residual::at(e, target, &cand, w);
        if cres.norm() < res.norm() || done(&cres) {
            (q, res, f) = (cand, cres, cf);
            lambda = (lambda * 0.5).max(MIN_DAMPING.min(p.damping));
        } else {
            lambda *= 4.0;
        }
    }
}

/// DLS step with joints at a limit removed when the step would push them further out.
fn limited_step(
    jac: &mut Matrix6xX<f64>,
    task: &Vector6<f64>,
    q: &JointState,
    limits: &[[f64; 2]],
    lambda: f64,
    scale: f64,
) -> Option<DVector<f64>> {
    let mut dq = DVector::zeros(q.values.len());
    for _ in 0..3 {
        let jjt: Matrix6<f64> = &*jac * jac.transpose() + Matrix6::identity() * (lambda * lambda);
        dq = jac.transpose() * jjt.cholesky()?.solve(task) * scale;
        let mut pinned = false;
        for (i, l) in limits.iter().enumerate() {
            let v = q.values[i];
            let outward = (v <= l[0] && dq[i] < 0.0) || (v >= l[1] && dq[i] > 0.0);
            if outward && jac.column(i).iter().any(|x| *x != 0.0) {
                jac.column_mut(i).fill(0.0);
                pinned = true;
            }
        }
        if !pinned {
            break;
        }
    }
    Some(dq)
}

/// Re-expresses an end-effector pose from the source base frame into the target base frame
/// through the shared camera: `calib_tgt^-1 * calib_src * ee`.
pub fn reexpress_ee(ee_in_source_base: &Transform, calib_src: &Transform, calib_tgt: &Transform) -> Transform {
    calib_tgt.inverse() * (*calib_src * *ee_in_source_base)
}

#[cfg(test)]
mod tests;
