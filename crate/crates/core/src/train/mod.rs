//! Behavior cloning, rewards, advantages, actor-critic updates, curriculum
//! and stage orchestration.

pub mod a3c;
pub mod batch;
pub mod bc;
pub mod config;
pub mod curriculum;
pub mod gae;
pub mod metrics;
pub mod problems;
pub mod reward;
pub mod stage;

use thiserror::Error;

pub use a3c::{train_a3c, A3cConfig, RlProblem, RoundStats, WorkerMode};
pub use bc::{
    bc_train_answerer, bc_train_master, bc_train_subpolicies, teacher_forced_accuracy, BcConfig,
    EpochStats,
};
pub use config::{Config, CONFIG_FORMAT_VERSION};
pub use curriculum::{sample_start, Curriculum, CurriculumConfig};
pub use gae::gae_advantages;
pub use metrics::{MetricLog, MetricRow};
pub use reward::RewardConfig;
pub use stage::{eval_suite, new_model, run_stage, Stage, TrainData};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Dataset(#[from] crate::planner::dataset::DatasetError),
    #[error(transparent)]
    Generate(#[from] crate::sim::GenError),
    #[error("non-finite loss {0}; batch rejected")]
    NonFiniteLoss(f64),
    #[error("stage {stage} needs a checkpoint that completed {needs} (or --from-scratch)")]
    MissingPrerequisite {
        stage: &'static str,
        needs: &'static str,
    },
    #[error("no {0} to train on")]
    EmptyData(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}
