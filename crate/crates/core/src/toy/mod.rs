//! Desk-scale transfer experiment: two planar arms seen from above, a scripted expert, a small
//! behavior-cloned policy and an evaluation grid over edit modes.

mod dataset;
mod env;
mod experiment;
mod obs;
mod policy;
mod stats;
mod world;


pub use dataset::{dataset_scene, sweep_path, write_dataset};
pub use env::{expert_action, sample_episode, scripted_expert, Action, TaskParams, ToyDemo, ToyEnv};
pub use experiment::{
    evaluate, generate_demos, run_experiment, training_set, write_outputs, ArmRole, CellResult, Controller, DemoStats,
    EvalOutcome, EvalSpec, NoiseResult, PairTest, ToyConfig, ToyExperimentReport, ToySetup,
};
pub use obs::{downsample_gray, FrameStack, ToyEditor};
pub use policy::{rows, train_bc, Gradients, MlpPolicy, TrainConfig};
pub use stats::{two_proportion_z_test, ZTest};
pub use world::{natural_pose, render_toy, toy_ik_params, PlanarEmbodiment, ToyArm, ToyRender, ToyScene, ToyWorld};

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error("expert did not solve the scene (block {block_to_goal:.3} m from goal)")]
    ExpertFailed { block_to_goal: f64 },
    #[error("a sample has no trials")]
    DegenerateSample,
    #[error("invalid toy config: {0}")]
    Config(String),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Output(#[from] crate::pipeline::PipelineError),
}
