//! Run configuration (TOML). Every field has a default; a file only needs
//! `format_version` plus whatever it overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::a3c::A3cConfig;
use super::bc::BcConfig;
use super::curriculum::CurriculumConfig;
use super::reward::RewardConfig;
use super::TrainError;
use crate::par::Exec;
use crate::policy::{Budgets, ModelConfig};
use crate::sim::GenConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_houses: usize,
    pub eval_houses: usize,
    pub questions_per_house: usize,
    pub spawns_per_question: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_houses: 100,
            eval_houses: 20,
            questions_per_house: 2,
            spawns_per_question: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlSchedule {
    /// Rounds per motion task in `rl-sub`.
    pub rounds_sub: usize,
    pub rounds_master: usize,
    pub rounds_joint: usize,
    /// Log a row every this many rounds.
    pub log_every: usize,
}

impl Default for RlSchedule {
    fn default() -> Self {
        Self {
            rounds_sub: 200,
            rounds_master: 100,
            rounds_joint: 100,
            log_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub offsets: Vec<usize>,
    /// Spawns per task for sub-policy success.
    pub sub_episodes: usize,
    /// Sequence-sensitive IoU instead of multiset IoU.
    pub iou_sequence: bool,
    pub questions_per_house: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            offsets: vec![10, 30, 50],
            sub_episodes: 200,
            iou_sequence: false,
            questions_per_house: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    /// Record elapsed seconds in the metric log; off makes logs byte-stable.
    pub wallclock: bool,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self { wallclock: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub format_version: u32,
    pub seed: u64,
    pub exec: Exec,
    pub gen: GenConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub bc: BcConfig,
    pub rl: A3cConfig,
    pub schedule: RlSchedule,
    pub curriculum: CurriculumConfig,
    pub rewards: RewardConfig,
    pub budgets: Budgets,
    pub eval: EvalConfig,
    pub log: LogConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 1,
            exec: Exec::Parallel,
            gen: GenConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            bc: BcConfig::default(),
            rl: A3cConfig::default(),
            schedule: RlSchedule::default(),
            curriculum: CurriculumConfig::default(),
            rewards: RewardConfig::default(),
            budgets: Budgets::default(),
            eval: EvalConfig::default(),
            log: LogConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(s: &str) -> Result<Self, TrainError> {
        let cfg: Config = toml::from_str(s).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let s = fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s).map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(TrainError::Config(format!(
                "config format_version {} unsupported (expected {CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.rewards
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        if self.budgets.per_subgoal == 0 || self.budgets.decisions == 0 {
            return Err(TrainError::Config("budgets must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.curriculum.threshold) {
            return Err(TrainError::Config(
                "curriculum threshold must lie in [0, 1]".into(),
            ));
        }
        if !(self.curriculum.decay > 0.0 && self.curriculum.decay <= 1.0) {
            return Err(TrainError::Config(
                "curriculum decay must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}
