//! Hierarchical controller: networks, segment goals, and the episode loop.

pub mod dump;
pub mod episode;
pub mod goal;
pub mod model;

pub use dump::{TrajectoryDump, DUMP_FORMAT_VERSION};
pub use episode::{
    run_segment, ActionStep, Actor, Budgets, Decision, EpisodeRecord, Mode, Rollout, Segment,
    Termination,
};
pub use goal::{judge_success, SegmentGoal};
pub use model::{argmax, ModelConfig, Nmc, PolicyError};
