//! Batch editing of recorded datasets.
//!
//! Layout on disk:
//!
//! ```text
//! manifest.json
//! calib.json
//! traj_<id>/states.jsonl        one StepRecord per line
//! traj_<id>/frame_<t>.png       RGB
//! traj_<id>/depth_<t>.png       optional, 16-bit millimeters
//! ```
//!
//! Edited output mirrors the layout and adds `mask_<t>.png` sidecars plus `report.json`.

mod io;
mod run;
mod session;

pub use io::{read_depth_mm, read_mask, read_rgb, write_depth_mm, write_mask, write_rgb};
pub use run::{run_edit, Direction, EditReport, FrameError, RunOptions, Timing};
pub use session::{EditEngine, EditSession, FrameOutcome};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compose::{ComposeError, Frame, Image};
use crate::geometry::{Calibration, GeometryError, Transform};
use crate::kinematics::JointState;
use crate::render::DepthBuffer;
use crate::robot_model::{Embodiment, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("schema error in {}: {msg}", path.display())]
    Schema { path: PathBuf, msg: String },
    #[error("cannot decode image {}: {msg}", path.display())]
    ImageDecode { path: PathBuf, msg: String },
    #[error("i/o error at {}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("buffer holds {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("inverse kinematics did not converge; frame dropped")]
    IkNotConverged,
    #[error("robot `{0}` is not listed in the manifest")]
    UnknownRobot(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingFile(path.to_path_buf())
        } else {
            PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() }
        }
    }

    fn schema(path: &Path, msg: impl ToString) -> Self {
        PipelineError::Schema { path: path.to_path_buf(), msg: msg.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub source: String,
    pub target: String,
    /// Relative to the manifest's directory.
    pub calibration: PathBuf,
    /// Robot name to embodiment file (JSON or URDF), relative to the manifest's directory.
    #[serde(default)]
    pub robots: BTreeMap<String, PathBuf>,
    pub trajectories: Vec<usize>,
    #[serde(default = "default_format")]
    pub image_format: String,
    #[serde(default)]
    pub has_depth: bool,
}

fn default_format() -> String {
    "png".into()
}

/// Commanded end-effector pose in the recording robot's base frame, plus gripper command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub ee_pose: Transform,
    pub aperture: f64,
}

/// One line of `states.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub joints: JointState,
    pub action: Action,
}

/// A trajectory's states; frames are decoded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: usize,
    pub dir: PathBuf,
    pub steps: Vec<StepRecord>,
    pub has_depth: bool,
}

pub fn trajectory_dir(root: &Path, id: usize) -> PathBuf {
    root.join(format!("traj_{id}"))
}

pub fn frame_file(t: usize) -> String {
    format!("frame_{t}.png")
}

pub fn depth_file(t: usize) -> String {
    format!("depth_{t}.png")
}

pub fn mask_file(t: usize) -> String {
    format!("mask_{t}.png")
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn frame_path(&self, i: usize) -> PathBuf {
        self.dir.join(frame_file(self.steps[i].t))
    }

    pub fn depth_path(&self, i: usize) -> PathBuf {
        self.dir.join(depth_file(self.steps[i].t))
    }

    pub fn load_frame(&self, i: usize) -> Result<Frame, PipelineError> {
        let step = &self.steps[i];
        let scene_depth = if self.has_depth { Some(read_depth_mm(&self.depth_path(i))?) } else { None };
        Ok(Frame {
            image: read_rgb(&self.frame_path(i))?,
            joints: step.joints.clone(),
            scene_depth,
            time_index: step.t,
            trajectory_id: self.trajectory_id,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub calibration: Calibration,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl Dataset {
    /// Number of trajectories.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn frame_count(&self) -> usize {
        self.trajectories.iter().map(TrajectoryRecord::len).sum()
    }

    pub fn robot_path(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let rel = self.manifest.robots.get(name).ok_or_else(|| PipelineError::UnknownRobot(name.to_string()))?;
        Ok(self.root.join(rel))
    }

    pub fn embodiment(&self, name: &str) -> Result<Embodiment, PipelineError> {
        Ok(Embodiment::load(&self.robot_path(name)?, None)?)
    }
}

fn require(path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingFile(path.to_path_buf()))
    }
}

fn read_states(path: &Path) -> Result<Vec<StepRecord>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut steps: Vec<StepRecord> = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let step: StepRecord = serde_json::from_str(line).map_err(|e| PipelineError::schema(path, format!("line {}: {e}", n + 1)))?;
        if let Some(prev) = steps.last() {
            if step.t <= prev.t {
                return Err(PipelineError::schema(path, format!("line {}: time index {} not increasing", n + 1, step.t)));
            }
        }
        steps.push(step);
    }
    Ok(steps)
}

/// Parses and checks the manifest and every file it references. Images are not decoded.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, PipelineError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| PipelineError::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| PipelineError::schema(manifest_path, e))?;
    if manifest.image_format != "png" {
        return Err(PipelineError::schema(manifest_path, format!("unsupported image format `{}`", manifest.image_format)));
    }
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let calib_path = root.join(&manifest.calibration);
    require(&calib_path)?;
    let calibration = Calibration::load(&calib_path).map_err(|e| PipelineError::schema(&calib_path, e))?;
    for rel in manifest.robots.values() {
        require(&root.join(rel))?;
    }
    let mut trajectories = Vec::with_capacity(manifest.trajectories.len());
    for &id in &manifest.trajectories {
        let dir = trajectory_dir(&root, id);
        let states = dir.join("states.jsonl");
        require(&states)?;
        let steps = read_states(&states)?;
        for s in &steps {
            require(&dir.join(frame_file(s.t)))?;
            if manifest.has_depth {
                require(&dir.join(depth_file(s.t)))?;
            }
        }
        trajectories.push(TrajectoryRecord { trajectory_id: id, dir, steps, has_depth: manifest.has_depth });
    }
    Ok(Dataset { root, manifest, calibration, trajectories })
}

/// Writes a dataset in the layout [`load_dataset`] reads.
pub struct DatasetWriter {
    root: PathBuf,
    manifest: DatasetManifest,
}

impl DatasetWriter {
    /// Creates `root`, writes `calib.json`. Robot paths are stored as given, relative to `root`.
    pub fn create(
        root: &Path,
        name: &str,
        source: &str,
        target: &str,
        calibration: &Calibration,
        robots: BTreeMap<String, PathBuf>,
    ) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|e| PipelineError::io(root, e))?;
        let calib = root.join("calib.json");
        fs::write(&calib, calibration.to_json()).map_err(|e| PipelineError::io(&calib, e))?;
        let manifest = DatasetManifest {
            name: name.to_string(),
            source: source.to_string(),
            target: target.to_string(),
            calibration: PathBuf::from("calib.json"),
            robots,
            trajectories: Vec::new(),
            image_format: default_format(),
            has_depth: false,
        };
        Ok(DatasetWriter { root: root.to_path_buf(), manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Adds one trajectory. All trajectories must agree on whether depth is present.
    pub fn write_trajectory(
        &mut self,
        id: usize,
        steps: &[StepRecord],
        images: &[Image],
        depths: Option<&[DepthBuffer]>,
    ) -> Result<(), PipelineError> {
        assert_eq!(steps.len(), images.len(), "one image per step");
        if self.manifest.trajectories.is_empty() {
            self.manifest.has_depth = depths.is_some();
        }
        assert_eq!(self.manifest.has_depth, depths.is_some(), "depth presence must match across trajectories");
        let dir = trajectory_dir(&self.root, id);
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        for (i, (s, img)) in steps.iter().zip(images).enumerate() {
            write_rgb(&dir.join(frame_file(s.t)), img)?;
            if let Some(d) = depths {
                write_depth_mm(&dir.join(depth_file(s.t)), &d[i])?;
            }
        }
        write_states(&dir.join("states.jsonl"), steps)?;
        self.manifest.trajectories.push(id);
        Ok(())
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(self) -> Result<PathBuf, PipelineError> {
        let path = self.root.join("manifest.json");
        write_json(&path, &self.manifest)?;
        Ok(path)
    }
}

pub(crate) fn write_states(path: &Path, steps: &[StepRecord]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for s in steps {
        text.push_str(&serde_json::to_string(s).expect("step serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Outcome of [`validate`]: counts plus every problem found.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trajectories: usize,
    pub frames: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Loads the dataset, both embodiments and every image, and checks that sizes, joint counts and
/// calibration entries agree. Structural errors are returned; content problems are listed.
pub fn validate(manifest_path: &Path) -> Result<ValidationReport, PipelineError> {
    let ds = load_dataset(manifest_path)?;
    let mut report = ValidationReport { trajectories: ds.len(), frames: ds.frame_count(), problems: Vec::new() };
    let k = ds.calibration.intrinsics;
    let mut dofs = Vec::new();
    for name in [&ds.manifest.source, &ds.manifest.target] {
        match ds.embodiment(name) {
            Ok(e) => dofs.push(e.dof()),
            Err(e) => report.problems.push(format!("robot `{name}`: {e}")),
        }
        if let Err(e) = ds.calibration.extrinsic(name) {
            report.problems.push(e.to_string());
        }
    }
    for traj in &ds.trajectories {
        for i in 0..traj.len() {
            let where_ = traj.frame_path(i);
            match traj.load_frame(i) {
                Ok(f) => {
                    if f.image.dims() != (k.width, k.height) {
                        report.problems.push(format!("{}: size {:?}, camera is {:?}", where_.display(), f.image.dims(), (k.width, k.height)));
                    }
                    if !dofs.is_empty() && !dofs.contains(&f.joints.len()) {
                        report.problems.push(format!("{}: {} joint values fit neither robot", where_.display(), f.joints.len()));
                    }
                }
                Err(e) => report.problems.push(e.to_string()),
            }
        }
    }
    Ok(report)
}
