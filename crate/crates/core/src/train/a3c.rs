//! Advantage actor-critic updates with parallel rollout workers.
//!
//! Each round every worker rolls out a few episodes on a parameter snapshot
//! and computes a gradient; gradients are applied to the shared store one
//! at a time. In `sync` mode all workers of a round read the same snapshot
//! and their gradients are applied in worker order, which makes a seeded run
//! reproducible regardless of thread scheduling. In `async` mode each worker
//! thread loops independently, copying the store under a lock before each
//! rollout and applying its gradient under the same lock.

use std::sync::Mutex;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{batch_gradient, BatchGrad, ItemLoss};
use super::curriculum::{Curriculum, CurriculumConfig};
use super::gae::gae_advantages;
use super::reward::RewardConfig;
use super::TrainError;
use crate::par::Exec;
use crate::policy::{EpisodeRecord, Nmc, PolicyError, Segment};
use crate::tensor::{AdamConfig, ParamStore, Tape, Var};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerMode {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A3cConfig {
    pub lr: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub clip: f64,
    pub workers: usize,
    pub episodes_per_worker: usize,
    pub mode: WorkerMode,
}

impl Default for A3cConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            clip: 5.0,
            workers: 4,
            episodes_per_worker: 4,
            mode: WorkerMode::Sync,
        }
    }
}

/// Actor-critic loss terms for one recorded trajectory at one level.
/// `log_probs` and `values` are the recomputed tape variables; advantages
/// come from the recorded rewards and values and enter as constants.
#[allow(clippy::too_many_arguments)]
pub fn actor_critic_terms(
    tape: &mut Tape<'_>,
    log_probs: &[Var],
    values: &[Var],
    actions: &[usize],
    rewards: &[f64],
    recorded_values: &[f64],
    rewards_cfg: &RewardConfig,
    cfg: &A3cConfig,
) -> Result<Vec<(Var, f64)>, PolicyError> {
    let (adv, targets) = gae_advantages(
        rewards,
        recorded_values,
        0.0,
        rewards_cfg.gamma,
        rewards_cfg.lambda,
    )
    .map_err(|e| PolicyError::Tensor(crate::tensor::TensorError::Shape(e.to_string())))?;
    let mut terms = Vec::with_capacity(3 * log_probs.len());
    for t in 0..log_probs.len() {
        let lp = tape.pick(log_probs[t], actions[t])?;
        terms.push((lp, -adv[t]));
        let se = tape.sq_err(values[t], targets[t]);
        terms.push((se, cfg.value_coef));
        let h = tape.entropy(log_probs[t]);
        terms.push((h, -cfg.entropy_coef));
    }
    Ok(terms)
}

/// Recomputes a sub-policy segment on `tape` and returns its loss terms.
pub fn segment_terms(
    model: &Nmc,
    tape: &mut Tape<'_>,
    seg: &Segment,
    rewards_cfg: &RewardConfig,
    cfg: &A3cConfig,
) -> Result<Vec<(Var, f64)>, PolicyError> {
    let mut h = model.zero_hidden(tape);
    let (mut lps, mut vals) = (Vec::new(), Vec::new());
    for s in &seg.steps {
        let v = tape.input(s.features.clone());
        let out = model.sub_step(tape, seg.subgoal, v, s.prev_action, h)?;
        h = out.h;
        lps.push(out.log_probs);
        vals.push(out.value);
    }
    let actions: Vec<usize> = seg.steps.iter().map(|s| s.action.index()).collect();
    let rewards: Vec<f64> = seg.steps.iter().map(|s| s.reward).collect();
    let recorded: Vec<f64> = seg.steps.iter().map(|s| s.value).collect();
    actor_critic_terms(
        tape,
        &lps,
        &vals,
        &actions,
        &rewards,
        &recorded,
        rewards_cfg,
        cfg,
    )
}

/// Recomputes the master decisions of an episode and returns loss terms.
pub fn master_terms(
    model: &Nmc,
    tape: &mut Tape<'_>,
    ep: &EpisodeRecord,
    rewards_cfg: &RewardConfig,
    cfg: &A3cConfig,
) -> Result<Vec<(Var, f64)>, PolicyError> {
    let q = tape.input(ep.q.clone());
    let mut h = model.zero_hidden(tape);
    let (mut lps, mut vals) = (Vec::new(), Vec::new());
    for d in &ep.decisions {
        let v = tape.input(d.features.clone());
        let out = model.master_step(tape, q, v, d.prev, h)?;
        h = out.h;
        lps.push(out.log_probs);
        vals.push(out.value);
    }
    let actions: Vec<usize> = ep
        .decisions
        .iter()
        .map(|d| model.space.index(d.subgoal))
        .collect();
    let rewards: Vec<f64> = ep.decisions.iter().map(|d| d.reward).collect();
    let recorded: Vec<f64> = ep.decisions.iter().map(|d| d.value).collect();
    actor_critic_terms(
        tape,
        &lps,
        &vals,
        &actions,
        &rewards,
        &recorded,
        rewards_cfg,
        cfg,
    )
}

/// A reinforcement-learning problem: how to roll out an episode and how to
/// turn it into a differentiable loss.
pub trait RlProblem: Sync {
    type Episode: Send + Sync;

    fn rollout(
        &self,
        store: &ParamStore,
        alpha: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self::Episode, PolicyError>;

    fn success(&self, ep: &Self::Episode) -> bool;

    fn loss(
        &self,
        tape: &mut Tape<'_>,
        ep: &Self::Episode,
    ) -> Result<Option<ItemLoss>, PolicyError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub loss: f64,
    pub alpha: f64,
    pub seconds: f64,
}

/// Sums episode losses on `store` and returns the batch gradient averaged
/// over episodes.
fn episodes_gradient<P: RlProblem>(
    problem: &P,
    store: &ParamStore,
    eps: &[P::Episode],
) -> Result<BatchGrad, TrainError> {
    let mut g = batch_gradient(store, eps, Exec::Sequential, |tape, ep| {
        problem.loss(tape, ep)
    })?;
    if !g.loss.is_finite() || !g.grads.is_finite() {
        return Err(TrainError::NonFiniteLoss(g.loss));
    }
    if g.items > 0 {
        g.grads.scale(1.0 / g.items as f64);
    }
    Ok(g)
}

fn apply(store: &mut ParamStore, g: &BatchGrad, cfg: &A3cConfig) -> Result<(), TrainError> {
    store.accumulate(&g.grads);
    if cfg.clip > 0.0 {
        store.clip_grad_norm(cfg.clip);
    }
    store.optimizer_step(&AdamConfig::with_lr(cfg.lr))?;
    Ok(())
}

/// Runs `rounds` rounds of actor-critic training.
#[allow(clippy::too_many_arguments)]
pub fn train_a3c<P: RlProblem>(
    problem: &P,
    store: &mut ParamStore,
    curriculum: CurriculumConfig,
    cfg: &A3cConfig,
    rounds: usize,
    seed: u64,
    exec: Exec,
    mut on_round: impl FnMut(&RoundStats, &ParamStore) + Send,
) -> Result<Curriculum, TrainError> {
    let mut cur = Curriculum::new(curriculum);
    let workers = cfg.workers.max(1);
    let per = cfg.episodes_per_worker.max(1);
    let started = Instant::now();
    match cfg.mode {
        WorkerMode::Sync => {
            for round in 0..rounds {
                let alpha = cur.alpha();
                let snapshot: &ParamStore = store;
                let results = exec.map_range(workers, |w| {
                    let mut rng = rng_for(seed, &[round as u64, w as u64]);
                    let eps = (0..per)
                        .map(|_| problem.rollout(snapshot, alpha, &mut rng))
                        .collect::<Result<Vec<_>, _>>()?;
                    let g = episodes_gradient(problem, snapshot, &eps)?;
                    let wins: Vec<bool> = eps.iter().map(|e| problem.success(e)).collect();
                    Ok::<_, TrainError>((g, wins))
                });
                let (mut loss, mut n, mut wins) = (0.0, 0, 0);
                for r in results {
                    let (g, outcomes) = r?;
                    apply(store, &g, cfg)?;
                    loss += g.loss;
                    for s in outcomes {
                        cur.record(s);
                        n += 1;
                        wins += s as usize;
                    }
                }
                let stats = RoundStats {
                    round,
                    episodes: n,
                    success_rate: wins as f64 / n.max(1) as f64,
                    loss: loss / n.max(1) as f64,
                    alpha: cur.alpha(),
                    seconds: started.elapsed().as_secs_f64(),
                };
                on_round(&stats, store);
            }
        }
        WorkerMode::Async => {
            struct Shared<'a> {
                store: &'a mut ParamStore,
                cur: Curriculum,
                done: usize,
                round_wins: usize,
                round_eps: usize,
                round_loss: f64,
                error: Option<TrainError>,
            }
            let total_updates = rounds * workers;
            let shared = Mutex::new(Shared {
                store,
                cur,
                done: 0,
                round_wins: 0,
                round_eps: 0,
                round_loss: 0.0,
                error: None,
            });
            let on_round = Mutex::new(&mut on_round);
            std::thread::scope(|scope| {
                for w in 0..workers {
                    let shared = &shared;
                    let on_round = &on_round;
                    scope.spawn(move || {
                        let mut k = 0u64;
                        loop {
                            let (snapshot, alpha) = {
                                let s = shared.lock().expect("store lock");
                                if s.done >= total_updates || s.error.is_some() {
                                    return;
                                }
                                (s.store.clone(), s.cur.alpha())
                            };
                            let mut rng = rng_for(seed, &[w as u64, k, 0xa5]);
                            k += 1;
                            let result = (0..per)
                                .map(|_| problem.rollout(&snapshot, alpha, &mut rng))
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(TrainError::from)
                                .and_then(|eps| {
                                    episodes_gradient(problem, &snapshot, &eps).map(|g| (g, eps))
                                });
                            let mut s = shared.lock().expect("store lock");
                            match result {
                                Err(e) => {
                                    s.error.get_or_insert(e);
                                    return;
                                }
                                Ok((g, eps)) => {
                                    if s.done >= total_updates {
                                        return;
                                    }
                                    if let Err(e) = apply(s.store, &g, cfg) {
                                        s.error.get_or_insert(e);
                                        return;
                                    }
                                    s.round_loss += g.loss;
                                    for e in &eps {
                                        let ok = problem.success(e);
                                        s.cur.record(ok);
                                        s.round_eps += 1;
                                        s.round_wins += ok as usize;
                                    }
                                    s.done += 1;
                                    if s.done.is_multiple_of(workers) {
                                        let stats = RoundStats {
                                            round: s.done / workers - 1,
                                            episodes: s.round_eps,
                                            success_rate: s.round_wins as f64
                                                / s.round_eps.max(1) as f64,
                                            loss: s.round_loss / s.round_eps.max(1) as f64,
                                            alpha: s.cur.alpha(),
                                            seconds: started.elapsed().as_secs_f64(),
                                        };
                                        s.round_eps = 0;
                                        s.round_wins = 0;
                                        s.round_loss = 0.0;
                                        (on_round.lock().expect("callback lock"))(&stats, s.store);
                                    }
                                }
                            }
                        }
                    });
                }
            });
            let s = shared.into_inner().expect("store lock");
            if let Some(e) = s.error {
                return Err(e);
            }
            cur = s.cur;
        }
    }
    Ok(cur)
}
