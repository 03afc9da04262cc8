use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::EditConfig;
use crate::geometry::CalibrationNoiseSpec;

use super::session::{EditEngine, EditSession, FrameOutcome};
use super::{frame_file, mask_file, trajectory_dir, write_json, write_mask, write_rgb, write_states, Dataset, PipelineError, TrajectoryRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Source robot in the images, target overlaid.
    #[default]
    Train,
    /// Target robot in the images, source overlaid.
    Eval,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Direction::Train),
            "eval" => Ok(Direction::Eval),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Train => "train",
            Direction::Eval => "eval",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub direction: Direction,
    pub config: EditConfig,
    pub noise: Option<CalibrationNoiseSpec>,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub trajectory_id: usize,
    pub time_index: usize,
    pub error: String,
}

/// Wall-clock statistics. Not reproducible, unlike the rest of the report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub jobs: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub dataset: String,
    pub source: String,
    pub target: String,
    pub direction: Direction,
    pub edit: EditConfig,
    pub noise: Option<CalibrationNoiseSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditReport {
    pub processed: usize,
    pub edited: usize,
    pub skipped: usize,
    pub ik_failures: usize,
    /// Trajectory id to the time indices whose IK failed.
    pub ik_failure_frames: BTreeMap<usize, Vec<usize>>,
    pub decode_failures: usize,
    pub errors: Vec<FrameError>,
    pub config: RunEcho,
    pub timing: Timing,
}

#[derive(Default)]
struct TrajOutcome {
    edited: usize,
    skipped: usize,
    ik_failed: Vec<usize>,
    decode_failures: usize,
    errors: Vec<FrameError>,
    frame_ms: Vec<f64>,
}

/// Edits every frame of `ds` and writes the result under `out`. Per-frame failures are counted
/// and the run continues; only I/O and schema errors abort.
pub fn run_edit(ds: &Dataset, opts: &RunOptions, out: &Path) -> Result<EditReport, PipelineError> {
    let started = Instant::now();
    let engine = Arc::new(EditEngine::from_dataset(ds, opts.direction, opts.config, opts.noise.as_ref())?);
    fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    write_layout(ds, out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| PipelineError::Io { path: out.to_path_buf(), msg: e.to_string() })?;
    let outcomes: Vec<Result<TrajOutcome, PipelineError>> = pool.install(|| {
        ds.trajectories.par_iter().map(|t| edit_trajectory(t, EditSession::new(engine.clone()), out)).collect()
    });

    let mut report = EditReport {
        processed: 0,
        edited: 0,
        skipped: 0,
        ik_failures: 0,
        ik_failure_frames: BTreeMap::new(),
        decode_failures: 0,
        errors: Vec::new(),
        config: RunEcho {
            dataset: ds.manifest.name.clone(),
            source: ds.manifest.source.clone(),
            target: ds.manifest.target.clone(),
            direction: opts.direction,
            edit: opts.config,
            noise: opts.noise,
        },
        timing: Timing::default(),
    };
    let mut frame_ms = Vec::new();
    for (traj, outcome) in ds.trajectories.iter().zip(outcomes) {
        let o = outcome?;
        report.edited += o.edited;
        report.skipped += o.skipped;
        report.ik_failures += o.ik_failed.len();
        if !o.ik_failed.is_empty() {
            report.ik_failure_frames.insert(traj.trajectory_id, o.ik_failed);
        }
        report.decode_failures += o.decode_failures;
        report.errors.extend(o.errors);
        frame_ms.extend(o.frame_ms);
    }
    report.processed = report.edited + report.skipped;
    report.timing = timing(&mut frame_ms, pool.current_num_threads(), started);
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Manifest (robot paths made absolute) and calibration, copied verbatim.
fn write_layout(ds: &Dataset, out: &Path) -> Result<(), PipelineError> {
    let mut manifest = ds.manifest.clone();
    for rel in manifest.robots.values_mut() {
        let abs = ds.root.join(&*rel);
        *rel = fs::canonicalize(&abs).map_err(|e| PipelineError::io(&abs, e))?;
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    let calib_src = ds.root.join(&ds.manifest.calibration);
    let calib_dst = out.join(&ds.manifest.calibration);
    fs::copy(&calib_src, &calib_dst).map_err(|e| PipelineError::io(&calib_src, e))?;
    Ok(())
}

fn edit_trajectory(traj: &TrajectoryRecord, mut session: EditSession, out: &Path) -> Result<TrajOutcome, PipelineError> {
    let dir = trajectory_dir(out, traj.trajectory_id);
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    let mut o = TrajOutcome::default();
    let mut kept = Vec::new();
    let passthrough = session.engine().config.mode == crate::compose::EditMode::None;
    for (i, step) in traj.steps.iter().enumerate() {
        let fail = |error: String| FrameError { trajectory_id: traj.trajectory_id, time_index: step.t, error };
        let frame = match traj.load_frame(i) {
            Ok(f) => f,
            Err(e @ (PipelineError::ImageDecode { .. } | PipelineError::MissingFile(_))) => {
                o.decode_failures += 1;
                o.skipped += 1;
                o.errors.push(fail(e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let clock = Instant::now();
        let outcome = session.edit(&frame);
        o.frame_ms.push(clock.elapsed().as_secs_f64() * 1e3);
        match outcome {
            Ok(FrameOutcome::Edited { result, ik_failed }) => {
                if ik_failed {
                    o.ik_failed.push(step.t);
                }
                let frame_out = dir.join(frame_file(step.t));
                if passthrough {
                    let src = traj.frame_path(i);
                    fs::copy(&src, &frame_out).map_err(|e| PipelineError::io(&src, e))?;
                } else {
                    write_rgb(&frame_out, &result.edited)?;
                }
                write_mask(&dir.join(mask_file(step.t)), &result.composite_mask())?;
                if traj.has_depth {
                    let src = traj.depth_path(i);
                    fs::copy(&src, dir.join(super::depth_file(step.t))).map_err(|e| PipelineError::io(&src, e))?;
                }
                kept.push(step.clone());
                o.edited += 1;
            }
            Ok(FrameOutcome::Skipped) => {
                o.ik_failed.push(step.t);
                o.skipped += 1;
            }
            Err(e) => {
                o.errors.push(fail(e.to_string()));
                o.skipped += 1;
            }
        }
    }
    write_states(&dir.join("states.jsonl"), &kept)?;
    Ok(o)
}

fn timing(frame_ms: &mut [f64], jobs: usize, started: Instant) -> Timing {
    frame_ms.sort_by(f64::total_cmp);
    let n = frame_ms.len();
    let mean_ms = if n == 0 { 0.0 } else { frame_ms.iter().sum::<f64>() / n as f64 };
    // Nearest-rank percentile.
    let p95_ms = if n == 0 { 0.0 } else { frame_ms[(0.95 * n as f64).ceil() as usize - 1] };
    Timing { jobs, mean_ms, p95_ms, total_ms: started.elapsed().as_secs_f64() * 1e3 }
}

