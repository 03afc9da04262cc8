use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use shadowkit_core::geometry::Calibration;
use shadowkit_core::pipeline::{self, Direction, RunOptions};
use shadowkit_core::render::render_robot;
use shadowkit_core::toy::{self, ToyConfig, ToySetup};
use shadowkit_core::{ik_solve, CalibrationNoiseSpec, EditConfig, EditMode, Embodiment, IkParams, JointState, Transform};

#[derive(Parser)]
#[command(name = "shadowkit", version, about = "Robot mask editing for cross-embodiment policy transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve inverse kinematics for one tool pose and print the solution as JSON
    Ik {
        /// Arm URDF, or an embodiment JSON file
        #[arg(long)]
        robot: PathBuf,
        /// Target pose JSON: {"rotation": [w, x, y, z], "translation": [x, y, z]}
        #[arg(long)]
        target: PathBuf,
        /// Initial joints as a JSON array or joint state; defaults to mid-range
        #[arg(long)]
        seed: Option<PathBuf>,
        /// Directory that package:// and relative mesh paths resolve against
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Maximum iterations
        #[arg(long, default_value_t = IkParams::default().max_iters)]
        max_iters: usize,
    },
    /// Render a robot's segmentation mask (and optionally depth) to PNG
    RenderMask {
        #[arg(long)]
        robot: PathBuf,
        /// Joints as a JSON array or joint state
        #[arg(long)]
        q: PathBuf,
        /// Calibration JSON with intrinsics and per-robot extrinsics
        #[arg(long)]
        calib: PathBuf,
        /// Extrinsics key in the calibration file
        #[arg(long)]
        robot_name: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write 16-bit depth in millimeters (0 = empty)
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Edit every frame of a dataset and write the result with mask sidecars and a report
    Edit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "train")]
        direction: Direction,
        #[arg(long, default_value = "shadow")]
        mode: EditMode,
        /// Source robot name; defaults to the manifest's
        #[arg(long)]
        source: Option<String>,
        /// Target robot name; defaults to the manifest's
        #[arg(long)]
        target: Option<String>,
        /// Calibration noise, per-axis translation std dev in meters
        #[arg(long, default_value_t = 0.0)]
        noise_sigma_t: f64,
        /// Calibration noise, rotation angle std dev in degrees
        #[arg(long, default_value_t = 0.0)]
        noise_sigma_r: f64,
        /// Seed for the calibration noise draw
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Optional EditConfig JSON; command-line mode overrides its mode
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check that a dataset is complete and consistent
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the toy transfer experiment
    Toy {
        /// Partial or full experiment config; missing fields take defaults
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a small toy dataset in the layout `edit` reads
    ToyDataset {
        #[arg(long, default_value_t = 4)]
        trajectories: usize,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ik { robot, target, seed, assets, max_iters } => ik(&robot, &target, seed.as_deref(), assets.as_deref(), max_iters),
        Command::RenderMask { robot, q, calib, robot_name, output, depth, assets } => {
            render_mask(&robot, &q, &calib, &robot_name, &output, depth.as_deref(), assets.as_deref())
        }
        Command::Edit { manifest, direction, mode, source, target, noise_sigma_t, noise_sigma_r, seed, jobs, config, output } => {
            let mut cfg = match config {
                Some(p) => read_json::<EditConfig>(&p)?,
                None => EditConfig::default(),
            };
            cfg.mode = mode;
            let noise = (noise_sigma_t != 0.0 || noise_sigma_r != 0.0).then(|| CalibrationNoiseSpec {
                sigma_translation: noise_sigma_t,
                sigma_rotation: noise_sigma_r.to_radians(),
                seed,
            });
            let opts = RunOptions { direction, config: cfg, noise, jobs };
            edit(&manifest, source, target, &opts, &output)
        }
        Command::Validate { manifest } => validate(&manifest),
        Command::Toy { config, output } => {
            let cfg = match config {
                Some(p) => read_json::<ToyConfig>(&p)?,
                None => ToyConfig::default(),
            };
            let report = toy::run_experiment(&cfg)?;
            toy::write_outputs(&report, &output)?;
            print!("{}", report.table());
            Ok(ExitCode::SUCCESS)
        }
        Command::ToyDataset { trajectories, frames, output } => {
            let manifest = toy::write_dataset(&ToySetup::new(&ToyConfig::default()), &output, trajectories, frames)?;
            println!("{}", manifest.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Accepts `[q0, q1, ...]` or a full joint state object.
fn read_joints(path: &Path) -> Result<JointState> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_array() {
        return Ok(JointState::new(serde_json::from_value(value)?, 0.0));
    }
    serde_json::from_value(value).with_context(|| format!("{} is not a joint array or joint state", path.display()))
}

fn load_robot(path: &Path, assets: Option<&Path>) -> Result<Embodiment> {
    Embodiment::load(path, assets).with_context(|| format!("loading robot {}", path.display()))
}

fn ik(robot: &Path, target: &Path, seed: Option<&Path>, assets: Option<&Path>, max_iters: usize) -> Result<ExitCode> {
    let e = load_robot(robot, assets)?;
    let target: Transform = read_json(target)?;
    let seed = match seed {
        Some(p) => read_joints(p)?,
        None => e.mid_range(),
    };
    let sol = ik_solve(&e, &target, &seed, &IkParams { max_iters, ..IkParams::default() });
    let out = serde_json::json!({
        "q": sol.q.values,
        "converged": sol.converged,
        "residual_pos": sol.residual_pos,
        "residual_rot": sol.residual_rot,
        "iters": sol.iters,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if sol.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn render_mask(
    robot: &Path,
    q: &Path,
    calib: &Path,
    name: &str,
    output: &Path,
    depth: Option<&Path>,
    assets: Option<&Path>,
) -> Result<ExitCode> {
    let e = load_robot(robot, assets)?;
    let q = read_joints(q)?;
    let calib = Calibration::load(calib)?;
    let r = render_robot(&e, &q, &calib.intrinsics, calib.extrinsic(name)?)?;
    pipeline::write_mask(output, &r.mask)?;
    if let Some(d) = depth {
        pipeline::write_depth_mm(d, &r.depth)?;
    }
    println!("{} robot pixels", r.mask.count());
    Ok(ExitCode::SUCCESS)
}

fn edit(manifest: &Path, source: Option<String>, target: Option<String>, opts: &RunOptions, output: &Path) -> Result<ExitCode> {
    let mut ds = pipeline::load_dataset(manifest)?;
    for (slot, name) in [(&mut ds.manifest.source, source), (&mut ds.manifest.target, target)] {
        if let Some(name) = name {
            if !ds.manifest.robots.contains_key(&name) {
                bail!("robot `{name}` is not listed in {}", manifest.display());
            }
            *slot = name;
        }
    }
    let report = pipeline::run_edit(&ds, opts, output)?;
    println!(
        "processed {} frames: {} edited, {} skipped, {} IK failures, {} decode failures; mean {:.2} ms/frame",
        report.processed, report.edited, report.skipped, report.ik_failures, report.decode_failures, report.timing.mean_ms
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(manifest: &Path) -> Result<ExitCode> {
    let report = pipeline::validate(manifest)?;
    println!("{} trajectories, {} frames", report.trajectories, report.frames);
    for p in &report.problems {
        println!("problem: {p}");
    }
    Ok(if report.problems.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
