//! Spawn curriculum over expert trajectories.
//!
//! Training spawns are drawn from the prefix `s_0 .. s_floor(alpha T)` of an
//! expert trajectory. `alpha` starts at 1 and shrinks by `decay` every time
//! the rolling success rate rises through the threshold. The window is
//! cleared after each decay, so the rate is always measured at the current
//! `alpha`; a policy that keeps succeeding at the new spawn spread crosses
//! again once the window refills.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub window: usize,
    pub threshold: f64,
    pub decay: f64,
    pub enabled: bool,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            window: 100,
            threshold: 0.40,
            decay: 0.9,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    pub cfg: CurriculumConfig,
    alpha: f64,
    recent: VecDeque<bool>,
    successes: usize,
    above: bool,
    crossings: usize,
}

impl Curriculum {
    pub fn new(cfg: CurriculumConfig) -> Self {
        Self {
            cfg,
            alpha: 1.0,
            recent: VecDeque::with_capacity(cfg.window),
            successes: 0,
            above: false,
            crossings: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn crossings(&self) -> usize {
        self.crossings
    }

    /// Rolling success rate, available once the window is full.
    pub fn rate(&self) -> Option<f64> {
        (self.recent.len() == self.cfg.window)
            .then(|| self.successes as f64 / self.cfg.window as f64)
    }

    /// Feeds one episode outcome; returns true when alpha was decayed.
    pub fn record(&mut self, success: bool) -> bool {
        if self.cfg.window == 0 {
            return false;
        }
        if self.recent.len() == self.cfg.window && self.recent.pop_front() == Some(true) {
            self.successes -= 1;
        }
        self.recent.push_back(success);
        if success {
            self.successes += 1;
        }
        let Some(rate) = self.rate() else {
            return false;
        };
        let now_above = rate >= self.cfg.threshold;
        let fired = now_above && !self.above;
        self.above = now_above;
        if fired && self.cfg.enabled {
            self.alpha *= self.cfg.decay;
            self.crossings += 1;
            self.recent.clear();
            self.successes = 0;
            self.above = false;
        }
        fired && self.cfg.enabled
    }
}

/// Uniform index over `0..=floor(alpha * len)`.
pub fn sample_start<R: Rng>(len: usize, alpha: f64, rng: &mut R) -> usize {
    let hi = ((alpha * len as f64).floor() as usize).min(len);
    rng.gen_range(0..=hi)
}
