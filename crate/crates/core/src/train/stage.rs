//! Training stages: `bc`, `rl-sub`, `rl-master`, `joint`.
//!
//! Stages mutate one [`ParamStore`] in place and record their names in the
//! store metadata, which is how later stages check their prerequisites.

use std::fmt;
use std::str::FromStr;

use super::a3c::{train_a3c, RlProblem, RoundStats};
use super::bc::{bc_train_answerer, bc_train_master, bc_train_subpolicies};
use super::config::Config;
use super::metrics::{MetricLog, MetricRow};
use super::problems::{HierarchyProblem, SubTaskProblem};
use super::TrainError;
use crate::planner::{build_dataset, PlanCorpus, Task};
use crate::policy::Nmc;
use crate::sim::{generate_suite, HouseLayout, Question};
use crate::tensor::ParamStore;
use crate::util::mix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Bc,
    RlSub,
    RlMaster,
    Joint,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Bc, Stage::RlSub, Stage::RlMaster, Stage::Joint];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Bc => "bc",
            Stage::RlSub => "rl-sub",
            Stage::RlMaster => "rl-master",
            Stage::Joint => "joint",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| TrainError::Config(format!("unknown stage {s:?}")))
    }
}

pub const META_STAGES: &str = "stages";
pub const META_TRAIN_HOUSES: &str = "train_houses";

/// Salt separating evaluation-suite seeds from training-suite seeds.
pub const EVAL_SALT: u64 = 0x6576_616c_7375_6974;

/// Houses, questions and the expert plan corpus used for training.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub houses: Vec<(HouseLayout, Vec<Question>)>,
    pub corpus: PlanCorpus,
}

impl TrainData {
    pub fn from_houses(
        houses: Vec<(HouseLayout, Vec<Question>)>,
        cfg: &Config,
    ) -> Result<Self, TrainError> {
        let corpus = build_dataset(&houses, cfg.data.spawns_per_question, cfg.seed, cfg.exec)?;
        Ok(Self { houses, corpus })
    }

    /// Training suite derived from the config seed.
    pub fn generate(cfg: &Config) -> Result<Self, TrainError> {
        let houses = generate_suite(
            cfg.seed,
            cfg.data.train_houses,
            cfg.data.questions_per_house,
            cfg.model.q_dim,
            &cfg.gen,
        )?;
        Self::from_houses(houses, cfg)
    }

    pub fn house_ids(&self) -> Vec<u64> {
        self.houses.iter().map(|(h, _)| h.id).collect()
    }
}

/// Held-out suite for a config: same generator, disjoint seeds.
pub fn eval_suite(cfg: &Config) -> Result<Vec<(HouseLayout, Vec<Question>)>, TrainError> {
    Ok(generate_suite(
        cfg.seed ^ EVAL_SALT,
        cfg.data.eval_houses,
        cfg.eval.questions_per_house,
        cfg.model.q_dim,
        &cfg.gen,
    )?)
}

/// Fresh model with parameters initialized from the config seed.
pub fn new_model(cfg: &Config) -> (Nmc, ParamStore) {
    let mut store = ParamStore::new(cfg.seed);
    let model = Nmc::new(cfg.gen.vocab, cfg.model, &mut store);
    (model, store)
}

pub fn completed_stages(store: &ParamStore) -> Vec<String> {
    store
        .meta
        .get(META_STAGES)
        .map(|s| {
            s.split(',')
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

fn mark(store: &mut ParamStore, stage: Stage, data: &TrainData) {
    let mut done = completed_stages(store);
    done.push(stage.name().to_string());
    store.meta.insert(META_STAGES.into(), done.join(","));
    let mut ids: Vec<u64> = store
        .meta
        .get(META_TRAIN_HOUSES)
        .map(|s| s.split(',').filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default();
    ids.extend(data.house_ids());
    ids.sort_unstable();
    ids.dedup();
    store.meta.insert(
        META_TRAIN_HOUSES.into(),
        ids.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
}

pub fn train_house_ids(store: &ParamStore) -> Vec<u64> {
    store
        .meta
        .get(META_TRAIN_HOUSES)
        .map(|s| s.split(',').filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default()
}

fn stage_seed(cfg: &Config, stage: Stage, extra: u64) -> u64 {
    mix64(cfg.seed ^ mix64(stage as u64 + 1) ^ extra.wrapping_mul(0x9e37_79b9))
}

fn rl_row(stage: Stage, task: &str, s: &RoundStats) -> MetricRow {
    MetricRow {
        stage: stage.name().into(),
        step: s.round + 1,
        task: task.into(),
        success_rate: Some(s.success_rate),
        loss: Some(s.loss),
        alpha: Some(s.alpha),
        wallclock: Some(s.seconds),
        ..Default::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn run_rl<P: RlProblem>(
    problem: &P,
    stage: Stage,
    task: &str,
    rounds: usize,
    seed: u64,
    cfg: &Config,
    store: &mut ParamStore,
    log: &mut MetricLog,
) -> Result<(), TrainError> {
    let every = cfg.schedule.log_every.max(1);
    let mut rows = Vec::new();
    train_a3c(
        problem,
        store,
        cfg.curriculum,
        &cfg.rl,
        rounds,
        seed,
        cfg.exec,
        |s, _| {
            if (s.round + 1) % every == 0 || s.round + 1 == rounds {
                rows.push(rl_row(stage, task, s));
            }
        },
    )?;
    for r in rows {
        log.push(r)?;
    }
    Ok(())
}

/// Runs one stage. RL stages need a completed `bc` stage in `store` unless
/// `from_scratch` is set. `tasks` restricts `rl-sub` (all motion tasks when
/// empty).
#[allow(clippy::too_many_arguments)]
pub fn run_stage(
    stage: Stage,
    cfg: &Config,
    data: &TrainData,
    model: &Nmc,
    store: &mut ParamStore,
    log: &mut MetricLog,
    from_scratch: bool,
    tasks: &[Task],
) -> Result<(), TrainError> {
    if stage != Stage::Bc && !from_scratch && !completed_stages(store).iter().any(|s| s == "bc") {
        return Err(TrainError::MissingPrerequisite {
            stage: stage.name(),
            needs: "bc",
        });
    }
    match stage {
        Stage::Bc => {
            let seed = stage_seed(cfg, stage, 0);
            let mut rows = Vec::new();
            bc_train_answerer(model, store, &data.corpus, &cfg.bc, seed, cfg.exec, |e| {
                rows.push(bc_row("answer", e.epoch, e.loss))
            })?;
            bc_train_subpolicies(
                model,
                store,
                &data.corpus,
                &cfg.bc,
                seed,
                cfg.exec,
                |t, e| rows.push(bc_row(t.name(), e.epoch, e.loss)),
            )?;
            bc_train_master(model, store, &data.corpus, &cfg.bc, seed, cfg.exec, |e| {
                rows.push(bc_row("master", e.epoch, e.loss))
            })?;
            for r in rows {
                log.push(r)?;
            }
        }
        Stage::RlSub => {
            let list: Vec<Task> = if tasks.is_empty() {
                Task::MOTION.to_vec()
            } else {
                tasks.to_vec()
            };
            for task in list {
                let problem = SubTaskProblem::new(
                    model,
                    &data.houses,
                    &data.corpus,
                    task,
                    cfg.budgets,
                    cfg.rewards,
                    cfg.rl,
                );
                if problem.segments.is_empty() {
                    log::warn!("no {} segments; skipping", task.name());
                    continue;
                }
                let seed = stage_seed(cfg, stage, task as u64);
                run_rl(
                    &problem,
                    stage,
                    task.name(),
                    cfg.schedule.rounds_sub,
                    seed,
                    cfg,
                    store,
                    log,
                )?;
            }
        }
        Stage::RlMaster | Stage::Joint => {
            let joint = stage == Stage::Joint;
            let problem = HierarchyProblem::new(
                model,
                &data.houses,
                &data.corpus,
                cfg.budgets,
                cfg.rewards,
                cfg.rl,
                joint,
            );
            if problem.plans.is_empty() {
                return Err(TrainError::EmptyData("plan corpus"));
            }
            let rounds = if joint {
                cfg.schedule.rounds_joint
            } else {
                cfg.schedule.rounds_master
            };
            run_rl(
                &problem,
                stage,
                "master",
                rounds,
                stage_seed(cfg, stage, 0),
                cfg,
                store,
                log,
            )?;
        }
    }
    mark(store, stage, data);
    Ok(())
}

fn bc_row(task: &str, epoch: usize, loss: f64) -> MetricRow {
    MetricRow {
        stage: "bc".into(),
        step: epoch + 1,
        task: task.into(),
        loss: Some(loss),
        ..Default::default()
    }
}
