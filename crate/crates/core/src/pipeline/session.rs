use std::path::Path;
use std::sync::Arc;

use crate::compose::{edit_frame, edit_frame_at, ComposeError, CompositeResult, EditConfig, EditMode, Frame, Image};
use crate::geometry::{perturb_extrinsics, CalibrationNoiseSpec, CameraIntrinsics, Transform};
use crate::kinematics::JointState;
use crate::robot_model::Embodiment;

use super::{load_dataset, Dataset, Direction, PipelineError};

/// Everything fixed for one editing run: both robots, the (possibly perturbed) calibration and
/// the edit settings. Shared read-only across trajectories.
#[derive(Clone, Debug)]
pub struct EditEngine {
    pub source: Embodiment,
    pub target: Embodiment,
    pub calib_source: Transform,
    pub calib_target: Transform,
    pub k: CameraIntrinsics,
    pub direction: Direction,
    pub config: EditConfig,
}

impl EditEngine {
    /// The noise draw, if any, is applied once to both extrinsics: one miscalibrated camera.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source: Embodiment,
        target: Embodiment,
        calib_source: Transform,
        calib_target: Transform,
        k: CameraIntrinsics,
        direction: Direction,
        config: EditConfig,
        noise: Option<&CalibrationNoiseSpec>,
    ) -> Self {
        let (calib_source, calib_target) = match noise {
            Some(spec) => (perturb_extrinsics(&calib_source, spec), perturb_extrinsics(&calib_target, spec)),
            None => (calib_source, calib_target),
        };
        EditEngine { source, target, calib_source, calib_target, k, direction, config }
    }

    pub fn from_dataset(
        ds: &Dataset,
        direction: Direction,
        config: EditConfig,
        noise: Option<&CalibrationNoiseSpec>,
    ) -> Result<Self, PipelineError> {
        let (src, tgt) = (&ds.manifest.source, &ds.manifest.target);
        Ok(EditEngine::new(
            ds.embodiment(src)?,
            ds.embodiment(tgt)?,
            *ds.calibration.extrinsic(src)?,
            *ds.calibration.extrinsic(tgt)?,
            ds.calibration.intrinsics,
            direction,
            config,
            noise,
        ))
    }

    pub fn open(
        manifest: &Path,
        direction: Direction,
        config: EditConfig,
        noise: Option<&CalibrationNoiseSpec>,
    ) -> Result<Self, PipelineError> {
        Self::from_dataset(&load_dataset(manifest)?, direction, config, noise)
    }

    /// Robot in the image, its counterpart, and their extrinsics.
    fn roles(&self) -> (&Embodiment, &Embodiment, &Transform, &Transform) {
        match self.direction {
            Direction::Train => (&self.source, &self.target, &self.calib_source, &self.calib_target),
            Direction::Eval => (&self.target, &self.source, &self.calib_target, &self.calib_source),
        }
    }

    /// Byte length of one RGB frame.
    pub fn frame_len(&self) -> usize {
        3 * self.k.pixel_count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FrameOutcome {
    /// `ik_failed` marks eval frames kept with a stale or unconverged virtual pose.
    Edited { result: CompositeResult, ik_failed: bool },
    /// Train frames whose IK did not converge are dropped.
    Skipped,
}

/// Edits the frames of one trajectory in order, warm-starting IK from the previous solution.
#[derive(Clone, Debug)]
pub struct EditSession {
    engine: Arc<EditEngine>,
    prev: Option<JointState>,
}

impl EditSession {
    pub fn new(engine: Arc<EditEngine>) -> Self {
        EditSession { engine, prev: None }
    }

    pub fn engine(&self) -> &EditEngine {
        &self.engine
    }

    /// Forgets the warm start; call between trajectories.
    pub fn reset(&mut self) {
        self.prev = None;
    }

    pub fn edit(&mut self, frame: &Frame) -> Result<FrameOutcome, ComposeError> {
        let e = &*self.engine;
        let (active, virtual_, ca, cv) = e.roles();
        let seed = self.prev.clone().unwrap_or_else(|| virtual_.mid_range());
        let result = edit_frame(frame, active, virtual_, ca, cv, &e.k, &e.config, &seed)?;
        if e.config.mode != EditMode::Shadow {
            return Ok(FrameOutcome::Edited { result, ik_failed: false });
        }
        if result.ik_converged {
            self.prev = result.virtual_q.clone();
            return Ok(FrameOutcome::Edited { result, ik_failed: false });
        }
        match (e.direction, &self.prev) {
            (Direction::Train, _) => Ok(FrameOutcome::Skipped),
            (Direction::Eval, Some(prev)) => {
                let mut result = edit_frame_at(frame, active, virtual_, ca, cv, &e.k, &e.config, prev)?;
                result.ik_converged = false;
                Ok(FrameOutcome::Edited { result, ik_failed: true })
            }
            (Direction::Eval, None) => Ok(FrameOutcome::Edited { result, ik_failed: true }),
        }
    }

    /// Edits a raw RGB buffer. Returns the edited RGB bytes and the composite mask, one byte
    /// per pixel (255 where set).
    pub fn edit_bytes(&mut self, rgb: &[u8], joints: &JointState) -> Result<(Vec<u8>, Vec<u8>), PipelineError> {
        let expected = self.engine.frame_len();
        if rgb.len() != expected {
            return Err(PipelineError::BufferSize { expected, got: rgb.len() });
        }
        let image = Image::from_raw(self.engine.k.width, self.engine.k.height, rgb.to_vec())?;
        match self.edit(&Frame::new(image, joints.clone()))? {
            FrameOutcome::Edited { result, .. } => {
                let mask = result.composite_mask().bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
                Ok((result.edited.data, mask))
            }
            FrameOutcome::Skipped => Err(PipelineError::IkNotConverged),
        }
    }
}
