//! Seeded collections of houses with their questions.

use rand::seq::SliceRandom;

use super::layout::{generate_house, GenConfig, GenError, HouseLayout};
use super::question::{question_for, unambiguous_targets, Question};
use crate::util::{mix64, rng_for};

/// Seed of the `k`-th house of a suite; also its id.
pub fn house_seed(seed: u64, k: u64) -> u64 {
    mix64(mix64(seed) ^ k)
}

/// `count` houses, each with up to `questions` questions about distinct
/// unambiguous targets. Houses without any unambiguous target are skipped
/// and replaced by the next seed.
pub fn generate_suite(
    seed: u64,
    count: usize,
    questions: usize,
    q_dim: usize,
    cfg: &GenConfig,
) -> Result<Vec<(HouseLayout, Vec<Question>)>, GenError> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count {
        let house = generate_house(house_seed(seed, k), cfg)?;
        k += 1;
        let mut targets = unambiguous_targets(&house);
        if targets.is_empty() {
            continue;
        }
        let mut rng = rng_for(house.id, &[0x7175_6573]);
        targets.shuffle(&mut rng);
        let qs = targets
            .iter()
            .take(questions.max(1))
            .enumerate()
            .map(|(i, &t)| question_for(&house, t, i, q_dim))
            .collect();
        out.push((house, qs));
    }
    Ok(out)
}
