use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::{EditMode, Image};
use crate::geometry::CalibrationNoiseSpec;
use crate::pipeline::{write_json, write_rgb, Direction};

use super::env::{expert_action, sample_episode, scripted_expert, TaskParams, ToyDemo, ToyEnv};
use super::obs::{downsample_gray, FrameStack, ToyEditor};
use super::policy::{train_bc, MlpPolicy, TrainConfig};
use super::stats::{two_proportion_z_test, ZTest};
use super::world::{PlanarEmbodiment, ToyArm, ToyWorld};
use super::ToyError;

const MODES: [EditMode; 3] = [EditMode::None, EditMode::BlackOnly, EditMode::Shadow];
const EXPERT_ATTEMPTS: usize = 20;
const DEMO_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub seed: u64,
    /// Expert demonstrations on the source arm.
    pub demos: usize,
    /// Rollouts per evaluation cell.
    pub episodes: usize,
    /// Std dev of the displacement noise executed (not recorded) by the expert, meters.
    pub expert_noise: f64,
    /// Stacked observations per policy input.
    pub obs_horizon: usize,
    /// Box-filter factor from render to policy resolution.
    pub downsample: u32,
    pub task: TaskParams,
    pub train: TrainConfig,
    pub world: ToyWorld,
    pub source: PlanarEmbodiment,
    pub target: PlanarEmbodiment,
    /// Nominal calibration noise levels as `[meters, degrees]`.
    pub noise_levels: Vec<[f64; 2]>,
    /// Multiplies every noise level before use.
    pub noise_scale: f64,
    /// Frames per sample rollout strip.
    pub strip_frames: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            seed: 7,
            demos: 1000,
            episodes: 50,
            expert_noise: 0.01,
            obs_horizon: 2,
            downsample: 3,
            task: TaskParams::default(),
            train: TrainConfig::default(),
            world: ToyWorld::default(),
            source: PlanarEmbodiment::source(),
            target: PlanarEmbodiment::target(),
            noise_levels: vec![[0.0, 0.0], [0.01, 5.0], [0.02, 10.0]],
            noise_scale: 0.25,
            strip_frames: 8,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        let bad = |m: String| Err(ToyError::Config(m));
        self.source.validate().or_else(bad)?;
        self.target.validate().or_else(bad)?;
        if self.demos == 0 {
            return bad("at least one demo is required".into());
        }
        if self.obs_horizon == 0 {
            return bad("obs_horizon must be at least 1".into());
        }
        let k = &self.world.k;
        if self.downsample == 0 || !k.width.is_multiple_of(self.downsample) || !k.height.is_multiple_of(self.downsample) {
            return bad(format!("downsample {} must divide {}x{}", self.downsample, k.width, k.height));
        }
        if !(self.task.max_step > 0.0) || self.task.horizon == 0 {
            return bad("task needs a positive step and horizon".into());
        }
        if self.noise_levels.iter().flatten().any(|v| !(*v >= 0.0)) || !(self.noise_scale >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        Ok(())
    }
}

/// Which arm is in the scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmRole {
    Source,
    Target,
}

impl ArmRole {
    /// Source scenes are edited like training data, target scenes like deployment frames.
    pub fn direction(self) -> Direction {
        match self {
            ArmRole::Source => Direction::Train,
            ArmRole::Target => Direction::Eval,
        }
    }
}

/// The world and both arms, built once per experiment.
#[derive(Clone, Debug)]
pub struct ToySetup {
    pub world: ToyWorld,
    pub source: ToyArm,
    pub target: ToyArm,
    pub task: TaskParams,
    pub obs_horizon: usize,
    pub downsample: u32,
}

impl ToySetup {
    pub fn new(cfg: &ToyConfig) -> Self {
        ToySetup {
            source: ToyArm::new(&cfg.world, cfg.source.clone()),
            target: ToyArm::new(&cfg.world, cfg.target.clone()),
            world: cfg.world.clone(),
            task: cfg.task,
            obs_horizon: cfg.obs_horizon,
            downsample: cfg.downsample,
        }
    }

    /// The arm in the scene and the one drawn in by the shadow edit.
    pub fn arms(&self, role: ArmRole) -> (&ToyArm, &ToyArm) {
        match role {
            ArmRole::Source => (&self.source, &self.target),
            ArmRole::Target => (&self.target, &self.source),
        }
    }

    pub fn feature_len(&self) -> usize {
        let k = &self.world.k;
        self.obs_horizon * ((k.width / self.downsample) * (k.height / self.downsample)) as usize
    }

    /// Scales an action label into the policy's output range and back.
    fn normalize(&self, a: [f64; 3]) -> [f64; 3] {
        [a[0] / self.task.max_step, a[1] / self.task.max_step, a[2]]
    }

    fn denormalize(&self, a: &[f64]) -> [f64; 3] {
        [a[0] * self.task.max_step, a[1] * self.task.max_step, a[2]]
    }
}

fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.rotate_left(32));
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoStats {
    pub requested: usize,
    pub generated: usize,
    /// Scenes the expert failed on; each was replaced by a fresh scene.
    pub expert_failures: usize,
}

/// Expert rollouts on the source arm. Demo `i` depends only on `seed` and `i`.
pub fn generate_demos(setup: &ToySetup, n: usize, seed: u64, expert_noise: f64) -> (Vec<ToyDemo>, DemoStats) {
    let results: Vec<(Option<ToyDemo>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, DEMO_STREAM, i as u64);
            let mut failures = 0;
            for _ in 0..EXPERT_ATTEMPTS {
                let (scene, start) = sample_episode(&setup.task, &mut rng);
                let arm = &setup.source;
                match scripted_expert(&setup.world, arm, &arm.spec, &setup.task, scene, start, expert_noise, &mut rng) {
                    Ok(demo) => return (Some(demo), failures),
                    Err(_) => failures += 1,
                }
            }
            (None, failures)
        })
        .collect();
    let expert_failures = results.iter().map(|r| r.1).sum();
    let demos: Vec<ToyDemo> = results.into_iter().filter_map(|r| r.0).collect();
    let stats = DemoStats { requested: n, generated: demos.len(), expert_failures };
    (demos, stats)
}

/// Policy inputs and normalized action labels for demos edited with `mode` in the training
/// direction.
pub fn training_set(setup: &ToySetup, demos: &[ToyDemo], mode: EditMode) -> (Array2<f64>, Array2<f64>) {
    let per_demo: Vec<(Vec<f64>, Vec<f64>)> = demos
        .par_iter()
        .map(|demo| {
            let (active, virtual_) = setup.arms(ArmRole::Source);
            let mut editor = ToyEditor::new(&setup.world, mode, active, virtual_);
            let mut stack = FrameStack::new(setup.obs_horizon);
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for ((frame, q), a) in demo.frames.iter().zip(&demo.joints).zip(&demo.actions) {
                let edited = editor.edit(frame, q);
                x.extend(stack.push(downsample_gray(&edited, setup.downsample)));
                y.extend(setup.normalize(*a));
            }
            (x, y)
        })
        .collect();
    let cols = setup.feature_len();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (dx, dy) in per_demo {
        x.extend(dx);
        y.extend(dy);
    }
    let n = y.len() / 3;
    (
        Array2::from_shape_vec((n, cols), x).expect("whole feature rows"),
        Array2::from_shape_vec((n, 3), y).expect("whole label rows"),
    )
}

/// Who chooses actions during a rollout.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    Policy(&'a MlpPolicy),
    /// The scripted expert, reading the simulator state instead of the image.
    Expert,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSpec {
    pub role: ArmRole,
    pub mode: EditMode,
    pub episodes: usize,
    pub seed: u64,
    /// Calibration error as `(meters, radians)` std devs, redrawn per episode.
    pub noise: Option<(f64, f64)>,
    /// Frames in the sample strip of the first episode; 0 skips it.
    pub strip_frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub successes: usize,
    pub episodes: usize,
    pub strip: Option<Image>,
}

impl EvalOutcome {
    pub fn rate(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.successes as f64 / self.episodes as f64)
    }
}

/// Closed-loop rollouts: render, edit, downsample and stack, act, simulate. Episode `e` draws its
/// scene and calibration error from `(seed, e)` alone, so every cell sees the same scenes.
pub fn evaluate(setup: &ToySetup, controller: Controller, spec: &EvalSpec) -> EvalOutcome {
    let results: Vec<(bool, Option<Image>)> = (0..spec.episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream_rng(spec.seed, EVAL_STREAM, e as u64);
            let (scene, start) = sample_episode(&setup.task, &mut rng);
            let noise_seed = rng.next_u64();
            let (active, virtual_) = setup.arms(spec.role);
            let mut env = ToyEnv::new(&setup.world, active, &setup.source.spec, setup.task, scene, start);
            let mut editor = ToyEditor::new(&setup.world, spec.mode, active, virtual_);
            if let Some((t, r)) = spec.noise {
                editor = editor.with_noise(&CalibrationNoiseSpec { sigma_translation: t, sigma_rotation: r, seed: noise_seed });
            }
            let mut stack = FrameStack::new(setup.obs_horizon);
            let keep = e == 0 && spec.strip_frames > 0;
            let mut seen = Vec::new();
            while !env.done() {
                let edited = editor.edit(&env.observe().image, &env.q);
                let features = stack.push(downsample_gray(&edited, setup.downsample));
                let action = match controller {
                    Controller::Policy(p) => setup.denormalize(&p.act(&features)),
                    Controller::Expert => expert_action(&env),
                };
                if keep {
                    seen.push(edited);
                }
                env.step(action);
            }
            if keep {
                seen.push(editor.edit(&env.observe().image, &env.q));
            }
            (env.solved(), keep.then(|| strip(&seen, spec.strip_frames)))
        })
        .collect();
    EvalOutcome {
        successes: results.iter().filter(|r| r.0).count(),
        episodes: spec.episodes,
        strip: results.into_iter().find_map(|r| r.1),
    }
}

/// Evenly spaced frames side by side.
fn strip(frames: &[Image], count: usize) -> Image {
    let n = count.min(frames.len()).max(1);
    let (w, h) = frames[0].dims();
    let mut out = Image::filled(w * n as u32, h, [0, 0, 0]);
    for i in 0..n {
        let src = if n == 1 { 0 } else { i * (frames.len() - 1) / (n - 1) };
        for y in 0..h {
            for x in 0..w {
                out.set(i as u32 * w + x, y, frames[src].get(x, y));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Edit mode the policy was trained and evaluated with.
    pub mode: EditMode,
    pub embodiment: ArmRole,
    pub direction: Direction,
    pub successes: usize,
    pub episodes: usize,
    /// `None` when the cell has no episodes.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseResult {
    /// Nominal level, meters and degrees.
    pub level: [f64; 2],
    pub sigma_translation: f64,
    pub sigma_rotation_rad: f64,
    pub successes: usize,
    pub episodes: usize,
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    /// `None` when either side has no episodes.
    pub test: Option<ZTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyExperimentReport {
    pub config: ToyConfig,
    pub demo_seed: u64,
    pub eval_seed: u64,
    pub demos: DemoStats,
    pub train_loss: BTreeMap<EditMode, f64>,
    pub cells: Vec<CellResult>,
    /// Shadow policy on the target arm under calibration error.
    pub noise: Vec<NoiseResult>,
    pub tests: Vec<PairTest>,
    /// First rollout of every cell, by name.
    #[serde(skip)]
    pub strips: Vec<(String, Image)>,
}

impl ToyExperimentReport {
    pub fn cell(&self, mode: EditMode, role: ArmRole) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.mode == mode && c.embodiment == role)
    }

    pub fn rate(&self, mode: EditMode, role: ArmRole) -> f64 {
        self.cell(mode, role).and_then(|c| c.rate).unwrap_or(f64::NAN)
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let rate = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.2}"));
        let _ = writeln!(s, "{:<12}{:<12}{:<10}{:>10}{:>8}", "policy", "embodiment", "direction", "success", "rate");
        for c in &self.cells {
            let emb = serde_json::to_value(c.embodiment).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<12}{:<12}{:<10}{:>10}{:>8}",
                c.mode.to_string(),
                emb.as_str().unwrap_or(""),
                c.direction.to_string(),
                format!("{}/{}", c.successes, c.episodes),
                rate(c.rate)
            );
        }
        let _ = writeln!(s, "\nshadow on target under calibration noise");
        for n in &self.noise {
            let _ = writeln!(s, "{:>6.3} m {:>5.1} deg {:>10}{:>8}", n.level[0], n.level[1], format!("{}/{}", n.successes, n.episodes), rate(n.rate));
        }
        let _ = writeln!(s, "\ntwo-proportion z-tests");
        for t in &self.tests {
            match t.test {
                Some(z) => writeln!(s, "{} vs {}: z = {:.3}, p = {:.3e}", t.a, t.b, z.z, z.p_two_sided),
                None => writeln!(s, "{} vs {}: no samples", t.a, t.b),
            }
            .ok();
        }
        s
    }
}

fn cell_name(mode: EditMode, role: ArmRole) -> String {
    let role = match role {
        ArmRole::Source => "source",
        ArmRole::Target => "target",
    };
    format!("{mode}_on_{role}")
}

/// Generates demos on the source arm, trains one policy per edit mode and evaluates each on both
/// arms, then sweeps calibration noise for the shadow policy on the target arm.
pub fn run_experiment(cfg: &ToyConfig) -> Result<ToyExperimentReport, ToyError> {
    cfg.validate()?;
    let setup = ToySetup::new(cfg);
    let demo_seed = cfg.seed;
    let eval_seed = cfg.seed.wrapping_add(1);
    let (demos, demo_stats) = generate_demos(&setup, cfg.demos, demo_seed, cfg.expert_noise);
    if demos.is_empty() {
        return Err(ToyError::Config("the expert solved none of the sampled scenes".into()));
    }
    log::info!("{} demos, {} expert failures", demo_stats.generated, demo_stats.expert_failures);

    let mut policies = BTreeMap::new();
    let mut train_loss = BTreeMap::new();
    for mode in MODES {
        let (x, y) = training_set(&setup, &demos, mode);
        let (policy, loss) = train_bc(&x, &y, &cfg.train);
        log::info!("trained {mode} policy on {} samples, loss {loss:.4}", x.nrows());
        policies.insert(mode, policy);
        train_loss.insert(mode, loss);
    }

    let mut cells = Vec::new();
    let mut strips = Vec::new();
    for mode in MODES {
        for role in [ArmRole::Source, ArmRole::Target] {
            let spec = EvalSpec { role, mode, episodes: cfg.episodes, seed: eval_seed, noise: None, strip_frames: cfg.strip_frames };
            let out = evaluate(&setup, Controller::Policy(&policies[&mode]), &spec);
            if let Some(img) = out.strip.clone() {
                strips.push((cell_name(mode, role), img));
            }
            cells.push(CellResult {
                mode,
                embodiment: role,
                direction: role.direction(),
                successes: out.successes,
                episodes: out.episodes,
                rate: out.rate(),
            });
        }
    }

    let mut noise = Vec::new();
    for (i, level) in cfg.noise_levels.iter().enumerate() {
        let (t, r) = (level[0] * cfg.noise_scale, level[1].to_radians() * cfg.noise_scale);
        let spec = EvalSpec {
            role: ArmRole::Target,
            mode: EditMode::Shadow,
            episodes: cfg.episodes,
            seed: eval_seed,
            noise: Some((t, r)),
            strip_frames: cfg.strip_frames,
        };
        let out = evaluate(&setup, Controller::Policy(&policies[&EditMode::Shadow]), &spec);
        if let Some(img) = out.strip.clone() {
            strips.push((format!("shadow_on_target_noise{i}"), img));
        }
        noise.push(NoiseResult {
            level: *level,
            sigma_translation: t,
            sigma_rotation_rad: r,
            successes: out.successes,
            episodes: out.episodes,
            rate: out.rate(),
        });
    }

    let pair = |a: (EditMode, ArmRole), b: (EditMode, ArmRole)| {
        let find = |m, r| cells.iter().find(|c: &&CellResult| c.mode == m && c.embodiment == r).expect("every cell evaluated");
        let (ca, cb) = (find(a.0, a.1), find(b.0, b.1));
        PairTest {
            a: cell_name(a.0, a.1),
            b: cell_name(b.0, b.1),
            test: two_proportion_z_test(ca.successes as u64, ca.episodes as u64, cb.successes as u64, cb.episodes as u64).ok(),
        }
    };
    use ArmRole::{Source, Target};
    use EditMode::{BlackOnly, None as Raw, Shadow};
    let tests = vec![
        pair((Shadow, Target), (BlackOnly, Target)),
        pair((Shadow, Target), (Raw, Target)),
        pair((Shadow, Target), (Raw, Source)),
        pair((BlackOnly, Source), (Raw, Source)),
        pair((Shadow, Source), (Raw, Source)),
    ];

    Ok(ToyExperimentReport { config: cfg.clone(), demo_seed, eval_seed, demos: demo_stats, train_loss, cells, noise, tests, strips })
}

/// Writes `report.json`, `table.txt` and one PNG strip per evaluated cell into `dir`.
pub fn write_outputs(report: &ToyExperimentReport, dir: &Path) -> Result<(), ToyError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ToyError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(&dir.join("report.json"), report)?;
    let table = dir.join("table.txt");
    std::fs::write(&table, report.table()).map_err(io(&table))?;
    for (name, img) in &report.strips {
        write_rgb(&dir.join(format!("{name}.png")), img)?;
    }
    Ok(())
}
