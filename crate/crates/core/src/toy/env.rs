use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compose::Image;
use crate::kinematics::JointState;

use super::world::{natural_pose, render_toy, PlanarEmbodiment, ToyArm, ToyRender, ToyScene, ToyWorld};
use super::ToyError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    /// Longest tool displacement per step, meters.
    pub max_step: f64,
    /// The block attaches when the tool is this close and engage is commanded.
    pub engage_radius: f64,
    pub horizon: usize,
    pub half_size: f64,
    pub bounds: [f64; 4],
    /// Region where blocks, goals and start positions are sampled.
    pub spawn: [f64; 4],
    /// Minimum block-to-goal distance at reset.
    pub min_separation: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            max_step: 0.05,
            engage_radius: 0.07,
            horizon: 80,
            half_size: 0.05,
            bounds: [-0.42, 0.2, 0.42, 0.72],
            spawn: [-0.34, 0.26, 0.34, 0.66],
            min_separation: 0.2,
        }
    }
}

/// Planar action: tool displacement in meters and an engage command.
pub type Action = [f64; 3];

/// Samples a scene and a start position for the tool.
pub fn sample_episode(task: &TaskParams, rng: &mut impl Rng) -> (ToyScene, Vector2<f64>) {
    let s = task.spawn;
    let mut point = || [rng.random_range(s[0]..=s[2]), rng.random_range(s[1]..=s[3])];
    let block = point();
    let goal = loop {
        let g = point();
        if (Vector2::from(g) - Vector2::from(block)).norm() >= task.min_separation {
            break g;
        }
    };
    let start = Vector2::from(point());
    (ToyScene { block, goal, half_size: task.half_size, bounds: task.bounds }, start)
}

/// One arm, one scene, kinematic block.
#[derive(Clone, Debug)]
pub struct ToyEnv<'a> {
    pub world: &'a ToyWorld,
    pub arm: &'a ToyArm,
    /// Arm whose natural heading defines the tool orientation for every position.
    pub reference: &'a PlanarEmbodiment,
    pub task: TaskParams,
    pub scene: ToyScene,
    pub q: JointState,
    pub ee: Vector2<f64>,
    pub carrying: bool,
    pub steps: usize,
}

impl<'a> ToyEnv<'a> {
    pub fn new(
        world: &'a ToyWorld,
        arm: &'a ToyArm,
        reference: &'a PlanarEmbodiment,
        task: TaskParams,
        scene: ToyScene,
        start: Vector2<f64>,
    ) -> Self {
        let (q, _) = arm.reach(&natural_pose(reference, scene.clamp(start)), &arm.embodiment.mid_range());
        let ee = arm.ee_position(&q);
        ToyEnv { world, arm, reference, task, scene, q, ee, carrying: false, steps: 0 }
    }

    pub fn observe(&self) -> ToyRender {
        render_toy(self.world, &self.scene, self.arm, &self.q)
    }

    pub fn solved(&self) -> bool {
        self.scene.solved()
    }

    pub fn done(&self) -> bool {
        self.solved() || self.steps >= self.task.horizon
    }

    pub fn step(&mut self, action: Action) {
        let mut delta = Vector2::new(action[0], action[1]);
        if !(delta.x.is_finite() && delta.y.is_finite()) {
            delta = Vector2::zeros();
        }
        let n = delta.norm();
        if n > self.task.max_step {
            delta *= self.task.max_step / n;
        }
        let goal = self.scene.clamp(self.ee + delta);
        let (q, _) = self.arm.reach(&natural_pose(self.reference, goal), &self.q);
        self.q = q;
        self.ee = self.arm.ee_position(&self.q);
        let near = (self.ee - Vector2::from(self.scene.block)).norm() <= self.task.engage_radius;
        self.carrying = action[2] > 0.5 && (self.carrying || near);
        if self.carrying {
            self.scene.block = [self.ee.x, self.ee.y];
        }
        self.steps += 1;
    }
}

/// Move to the block, engage, carry it to the goal. Engage is raised a little early so the
/// command is already on when the tool arrives.
pub fn expert_action(env: &ToyEnv) -> Action {
    let block = Vector2::from(env.scene.block);
    let (target, engage) = if env.carrying {
        (Vector2::from(env.scene.goal), 1.0)
    } else {
        let close = (block - env.ee).norm() <= 2.0 * env.task.engage_radius;
        (block, if close { 1.0 } else { 0.0 })
    };
    let mut d = target - env.ee;
    let n = d.norm();
    if n > env.task.max_step {
        d *= env.task.max_step / n;
    }
    [d.x, d.y, engage]
}

/// A recorded expert episode: observation before each step and the expert's label.
#[derive(Clone, Debug)]
pub struct ToyDemo {
    pub scene: ToyScene,
    pub frames: Vec<Image>,
    pub joints: Vec<JointState>,
    pub actions: Vec<Action>,
    pub solved: bool,
}

/// Rolls out the expert. With `action_noise > 0` the executed displacement is perturbed while the
/// recorded label stays the expert's, which widens the states the demos cover.
pub fn scripted_expert(
    world: &ToyWorld,
    arm: &ToyArm,
    reference: &PlanarEmbodiment,
    task: &TaskParams,
    scene: ToyScene,
    start: Vector2<f64>,
    action_noise: f64,
    rng: &mut impl Rng,
) -> Result<ToyDemo, ToyError> {
    let mut env = ToyEnv::new(world, arm, reference, *task, scene, start);
    let noise = Normal::new(0.0, action_noise.max(0.0)).expect("finite sigma");
    let mut demo = ToyDemo { scene, frames: Vec::new(), joints: Vec::new(), actions: Vec::new(), solved: false };
    // A trajectory has at least one frame, even when the block starts on the goal.
    loop {
        let a = expert_action(&env);
        demo.frames.push(env.observe().image);
        demo.joints.push(env.q.clone());
        demo.actions.push(a);
        if env.done() {
            break;
        }
        let mut executed = a;
        if action_noise > 0.0 {
            executed[0] += noise.sample(rng);
            executed[1] += noise.sample(rng);
        }
        env.step(executed);
    }
    demo.solved = env.solved();
    if demo.solved {
        Ok(demo)
    } else {
        Err(ToyError::ExpertFailed { block_to_goal: env.scene.block_to_goal() })
    }
}
