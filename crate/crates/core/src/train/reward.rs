//! Per-step rewards for both levels.
//!
//! Sub-policy step: `beta * (d_before - d_after) - collision * [collided]`,
//! plus `terminal` on the last step of a successful segment.
//! Master decision: `beta * (d_before - d_after)` on distance to the target
//! object (when shaping is enabled), plus `terminal` on a correct answer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{EpisodeRecord, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub terminal: f64,
    pub beta: f64,
    /// Magnitude of the collision penalty (applied with a minus sign).
    pub collision: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Shaped distance reward for the master in addition to the answer reward.
    pub master_shaped: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            terminal: 1.0,
            beta: 0.1,
            collision: 0.02,
            gamma: 0.99,
            lambda: 0.95,
            master_shaped: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("step {0} has no distance bookkeeping")]
    MissingDistance(usize),
    #[error("gamma and lambda must lie in [0, 1]")]
    Discount,
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if (0.0..=1.0).contains(&self.gamma) && (0.0..=1.0).contains(&self.lambda) {
            Ok(())
        } else {
            Err(RewardError::Discount)
        }
    }

    /// Reward of one primitive step. Distances are in cells; a step with
    /// unknown distances earns no shaping term.
    pub fn step_reward(
        &self,
        d_before: Option<u32>,
        d_after: Option<u32>,
        collided: bool,
        terminal_success: bool,
    ) -> f64 {
        let shaped = match (d_before, d_after) {
            (Some(a), Some(b)) => self.beta * (a as f64 - b as f64),
            _ => 0.0,
        };
        let mut r = shaped - if collided { self.collision } else { 0.0 };
        if terminal_success {
            r += self.terminal;
        }
        r
    }

    pub fn decision_reward(&self, d_before: u32, d_after: u32, correct_answer: bool) -> f64 {
        let shaped = if self.master_shaped {
            self.beta * (d_before as f64 - d_after as f64)
        } else {
            0.0
        };
        if correct_answer {
            shaped + self.terminal
        } else {
            shaped
        }
    }
}

/// Recomputes a segment's rewards from its recorded bookkeeping.
pub fn segment_rewards(seg: &Segment, cfg: &RewardConfig) -> Result<Vec<f64>, RewardError> {
    let n = seg.steps.len();
    seg.steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            if seg.has_target && (s.d_before.is_none() || s.d_after.is_none()) {
                return Err(RewardError::MissingDistance(t));
            }
            Ok(cfg.step_reward(s.d_before, s.d_after, s.collided, t + 1 == n && seg.success))
        })
        .collect()
}

/// Recomputes the master-level rewards of an episode.
pub fn master_rewards(ep: &EpisodeRecord, cfg: &RewardConfig) -> Vec<f64> {
    ep.decisions
        .iter()
        .map(|d| cfg.decision_reward(d.d_before, d.d_after, d.answered && ep.correct))
        .collect()
}
