use std::collections::VecDeque;

use crate::compose::{edit_frame, EditConfig, EditMode, Frame, Image};
use crate::geometry::{perturb_extrinsics, CalibrationNoiseSpec, CameraIntrinsics, Transform};
use crate::kinematics::JointState;

use super::world::{toy_ik_params, ToyArm, ToyWorld};

/// Box-filtered grayscale at `1/factor` resolution, values in `[0, 1]`.
pub fn downsample_gray(img: &Image, factor: u32) -> Vec<f64> {
    let (w, h) = (img.width / factor, img.height / factor);
    let gray = img.to_gray();
    let area = f64::from(factor * factor);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            for dy in 0..factor {
                let row = ((y * factor + dy) * img.width) as usize;
                for dx in 0..factor {
                    sum += f64::from(gray[row + (x * factor + dx) as usize]);
                }
            }
            out.push(sum / area);
        }
    }
    out
}

/// The last `depth` observations, newest first. The first observation fills every slot.
#[derive(Clone, Debug)]
pub struct FrameStack {
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    pub fn new(depth: usize) -> Self {
        FrameStack { depth: depth.max(1), frames: VecDeque::new() }
    }

    pub fn push(&mut self, obs: Vec<f64>) -> Vec<f64> {
        if self.frames.is_empty() {
            self.frames.extend(std::iter::repeat_n(obs.clone(), self.depth - 1));
        }
        self.frames.push_front(obs);
        self.frames.truncate(self.depth);
        self.frames.iter().flatten().copied().collect()
    }
}

/// Applies the edit to successive toy frames of one arm, chaining the IK warm start.
#[derive(Clone, Debug)]
pub struct ToyEditor<'a> {
    pub mode: EditMode,
    pub k: CameraIntrinsics,
    pub active: &'a ToyArm,
    pub virtual_: &'a ToyArm,
    pub calib_active: Transform,
    pub calib_virtual: Transform,
    seed: Option<JointState>,
}

impl<'a> ToyEditor<'a> {
    pub fn new(world: &ToyWorld, mode: EditMode, active: &'a ToyArm, virtual_: &'a ToyArm) -> Self {
        ToyEditor {
            mode,
            k: world.k,
            active,
            virtual_,
            calib_active: active.calibration,
            calib_virtual: virtual_.calibration,
            seed: None,
        }
    }

    /// Replaces both extrinsics with ones perturbed by the same camera error.
    pub fn with_noise(mut self, noise: &CalibrationNoiseSpec) -> Self {
        self.calib_active = perturb_extrinsics(&self.active.calibration, noise);
        self.calib_virtual = perturb_extrinsics(&self.virtual_.calibration, noise);
        self
    }

    pub fn edit(&mut self, image: &Image, q: &JointState) -> Image {
        if self.mode == EditMode::None {
            return image.clone();
        }
        let cfg = EditConfig { mode: self.mode, ik: toy_ik_params(), ..EditConfig::default() };
        let frame = Frame::new(image.clone(), q.clone());
        let seed = self.seed.clone().unwrap_or_else(|| self.virtual_.embodiment.mid_range());
        let r = edit_frame(
            &frame,
            &self.active.embodiment,
            &self.virtual_.embodiment,
            &self.calib_active,
            &self.calib_virtual,
            &self.k,
            &cfg,
            &seed,
        )
        .expect("toy frames match the toy camera");
        if r.ik_converged {
            self.seed = r.virtual_q;
        }
        r.edited
    }
}
