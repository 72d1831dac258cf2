//! Generalized advantage estimation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{rewards} rewards but {values} values")]
pub struct LengthMismatch {
    pub rewards: usize,
    pub values: usize,
}

/// Returns `(advantages, return targets)` where
/// `delta_t = r_t + gamma V_{t+1} - V_t` (with `V_T = bootstrap`),
/// `A_t = sum_k (gamma lambda)^k delta_{t+k}` and targets are `A_t + V_t`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), LengthMismatch> {
    if rewards.len() != values.len() {
        return Err(LengthMismatch {
            rewards: rewards.len(),
            values: values.len(),
        });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}
