use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::geometry::{Calibration, Transform};
use crate::kinematics::JointState;
use crate::pipeline::{Action, DatasetWriter, StepRecord};
use crate::robot_model::{write_urdf, EmbodimentFile};

use super::experiment::ToySetup;
use super::world::{natural_pose, render_toy, ToyArm, ToyScene};
use super::ToyError;

/// Source-arm joints along a wavy tool path across the table; `traj` shifts the phase.
pub fn sweep_path(setup: &ToySetup, traj: usize, frames: usize) -> Vec<JointState> {
    let arm = &setup.source;
    let mut q = arm.embodiment.mid_range();
    (0..frames)
        .map(|t| {
            let s = t as f64 / frames as f64;
            let p = Vector2::new(-0.3 + 0.6 * s, 0.45 + 0.15 * (5.0 * s + 0.7 * traj as f64).sin());
            q = arm.reach(&natural_pose(&arm.spec, p), &q).0;
            q.clone()
        })
        .collect()
}

/// Fixed block and goal used by generated datasets.
pub fn dataset_scene(setup: &ToySetup) -> ToyScene {
    ToyScene { block: [-0.15, 0.35], goal: [0.2, 0.6], half_size: setup.task.half_size, bounds: setup.task.bounds }
}

fn write_robot(arm: &ToyArm, dir: &Path) -> Result<PathBuf, ToyError> {
    let urdf = write_urdf(arm.embodiment.arm(), dir).map_err(|e| ToyError::Config(e.to_string()))?;
    let file = EmbodimentFile {
        name: arm.spec.name.clone(),
        arm: urdf.file_name().expect("urdf file").into(),
        gripper: None,
        mount: Transform::identity(),
        tcp: *arm.embodiment.tcp(),
    };
    let path = dir.join(format!("{}.json", arm.spec.name));
    let text = serde_json::to_string_pretty(&file).expect("embodiment file serializes");
    std::fs::write(&path, text).map_err(|source| ToyError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes a dataset of source-arm sweeps with table depth under `root`, both arms' robot files
/// and calibration included. Returns the manifest path.
pub fn write_dataset(setup: &ToySetup, root: &Path, trajectories: usize, frames: usize) -> Result<PathBuf, ToyError> {
    let robots_dir = root.join("robots");
    std::fs::create_dir_all(&robots_dir).map_err(|source| ToyError::Io { path: robots_dir.clone(), source })?;
    let mut robots = BTreeMap::new();
    let mut extrinsics = BTreeMap::new();
    for arm in [&setup.source, &setup.target] {
        let path = write_robot(arm, &robots_dir)?;
        robots.insert(arm.spec.name.clone(), path.strip_prefix(root).expect("inside root").to_path_buf());
        extrinsics.insert(arm.spec.name.clone(), arm.calibration);
    }
    let calib = Calibration { intrinsics: setup.world.k, extrinsics };
    let mut w = DatasetWriter::create(root, "toy", &setup.source.spec.name, &setup.target.spec.name, &calib, robots)?;
    let scene = dataset_scene(setup);
    for id in 0..trajectories {
        let qs = sweep_path(setup, id, frames);
        let renders: Vec<_> = qs.iter().map(|q| render_toy(&setup.world, &scene, &setup.source, q)).collect();
        let steps: Vec<StepRecord> = qs
            .iter()
            .enumerate()
            .map(|(t, q)| StepRecord { t, joints: q.clone(), action: Action { ee_pose: setup.source.ee_pose(q), aperture: 0.0 } })
            .collect();
        let images: Vec<_> = renders.iter().map(|r| r.image.clone()).collect();
        let depths: Vec<_> = renders.iter().map(|r| r.scene_depth.clone()).collect();
        w.write_trajectory(id, &steps, &images, Some(&depths))?;
    }
    Ok(w.finish()?)
}
