//! Hierarchical behavior cloning: master on (state, next subgoal) pairs,
//! sub-policies on their matching-task segments, answerer on the last
//! frames of expert trajectories.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::{batch_gradient, ItemLoss};
use super::TrainError;
use crate::par::Exec;
use crate::planner::dataset::{AnswerExample, SubDemo};
use crate::planner::{PlanCorpus, PlanRecord, Task};
use crate::policy::model::argmax;
use crate::policy::{Nmc, PolicyError};
use crate::tensor::{AdamConfig, ParamStore, Tape, Var};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs_sub: usize,
    pub epochs_master: usize,
    pub epochs_answer: usize,
    /// Global gradient-norm clip; 0 disables.
    pub clip: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 32,
            epochs_sub: 10,
            epochs_master: 20,
            epochs_answer: 20,
            clip: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-decision cross-entropy over the epoch's minibatches.
    pub loss: f64,
    pub terms: usize,
}

/// Cross-entropy of one sub-policy demonstration, stop label included.
pub fn sub_demo_loss(
    model: &Nmc,
    tape: &mut Tape<'_>,
    demo: &SubDemo<'_>,
) -> Result<Option<ItemLoss>, PolicyError> {
    let mut h = model.zero_hidden(tape);
    let mut terms: Vec<(Var, f64)> = Vec::new();
    for (features, prev, label) in demo.steps() {
        let v = tape.input(features.to_vec());
        let out = model.sub_step(tape, demo.subgoal, v, prev, h)?;
        h = out.h;
        terms.push((tape.pick(out.log_probs, label.index())?, -1.0));
    }
    let n = terms.len();
    Ok((n > 0).then(|| ItemLoss {
        loss: tape.sum(&terms),
        terms: n,
    }))
}

/// Teacher-forced cross-entropy of a master plan.
pub fn master_plan_loss(
    model: &Nmc,
    tape: &mut Tape<'_>,
    record: &PlanRecord,
) -> Result<Option<ItemLoss>, PolicyError> {
    let q = tape.input(record.question.encoding.clone());
    let mut h = model.zero_hidden(tape);
    let mut prev = model.space.start_token();
    let mut terms = Vec::new();
    for seg in &record.plan.segments {
        let v = tape.input(record.features[seg.start].clone());
        let out = model.master_step(tape, q, v, prev, h)?;
        h = out.h;
        let label = model.space.index(seg.subgoal);
        terms.push((tape.pick(out.log_probs, label)?, -1.0));
        prev = label;
    }
    let n = terms.len();
    Ok((n > 0).then(|| ItemLoss {
        loss: tape.sum(&terms),
        terms: n,
    }))
}

pub fn answer_loss(
    model: &Nmc,
    tape: &mut Tape<'_>,
    ex: &AnswerExample<'_>,
) -> Result<Option<ItemLoss>, PolicyError> {
    let frames: Vec<Var> = ex.frames.iter().map(|f| tape.input(f.to_vec())).collect();
    let out = model.answer_forward(tape, &ex.question.tokens, &frames)?;
    let lp = tape.pick(out.log_probs, ex.answer)?;
    Ok(Some(ItemLoss {
        loss: tape.sum(&[(lp, -1.0)]),
        terms: 1,
    }))
}

/// Minibatch Adam over `items` for `epochs` epochs. Shuffling is seeded by
/// `(seed, tag, epoch)`.
#[allow(clippy::too_many_arguments)]
pub fn fit<T, F>(
    store: &mut ParamStore,
    items: &[T],
    epochs: usize,
    cfg: &BcConfig,
    seed: u64,
    tag: u64,
    exec: Exec,
    loss: F,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<Vec<EpochStats>, TrainError>
where
    T: Sync,
    F: Fn(&mut Tape<'_>, &T) -> Result<Option<ItemLoss>, PolicyError> + Sync,
{
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut history = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..items.len()).collect();
    for epoch in 0..epochs {
        let mut rng = rng_for(seed, &[tag, epoch as u64]);
        order.shuffle(&mut rng);
        let (mut total, mut terms) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let batch: Vec<&T> = chunk.iter().map(|&i| &items[i]).collect();
            let mut g = batch_gradient(store, &batch, exec, |tape, item| loss(tape, item))?;
            if g.terms == 0 {
                continue;
            }
            if !g.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss(g.loss));
            }
            total += g.loss;
            terms += g.terms;
            g.grads.scale(1.0 / g.terms as f64);
            store.accumulate(&g.grads);
            if cfg.clip > 0.0 {
                store.clip_grad_norm(cfg.clip);
            }
            store.optimizer_step(&adam)?;
        }
        let stats = EpochStats {
            epoch,
            loss: if terms > 0 { total / terms as f64 } else { 0.0 },
            terms,
        };
        on_epoch(stats);
        history.push(stats);
    }
    Ok(history)
}

/// Mean per-decision loss over a dataset without updating anything.
pub fn dataset_loss<T, F>(
    store: &ParamStore,
    items: &[T],
    exec: Exec,
    loss: F,
) -> Result<f64, TrainError>
where
    T: Sync,
    F: Fn(&mut Tape<'_>, &T) -> Result<Option<ItemLoss>, PolicyError> + Sync,
{
    let g = batch_gradient(store, items, exec, loss)?;
    Ok(if g.terms > 0 {
        g.loss / g.terms as f64
    } else {
        0.0
    })
}

/// Trains each motion task on its own demonstrations. Tasks without data
/// are skipped with a warning.
pub fn bc_train_subpolicies(
    model: &Nmc,
    store: &mut ParamStore,
    corpus: &PlanCorpus,
    cfg: &BcConfig,
    seed: u64,
    exec: Exec,
    mut on_epoch: impl FnMut(Task, EpochStats),
) -> Result<Vec<(Task, Vec<EpochStats>)>, TrainError> {
    let mut out = Vec::new();
    for task in Task::MOTION {
        let demos = corpus.demos_for_task(task);
        if demos.is_empty() {
            log::warn!("no {} demonstrations; skipping", task.name());
            continue;
        }
        let tag = 100 + task as u64;
        let h = fit(
            store,
            &demos,
            cfg.epochs_sub,
            cfg,
            seed,
            tag,
            exec,
            |t, d| sub_demo_loss(model, t, d),
            |s| on_epoch(task, s),
        )?;
        out.push((task, h));
    }
    Ok(out)
}

pub fn bc_train_master(
    model: &Nmc,
    store: &mut ParamStore,
    corpus: &PlanCorpus,
    cfg: &BcConfig,
    seed: u64,
    exec: Exec,
    on_epoch: impl FnMut(EpochStats),
) -> Result<Vec<EpochStats>, TrainError> {
    if corpus.plans.is_empty() {
        log::warn!("empty master corpus; skipping");
        return Ok(Vec::new());
    }
    fit(
        store,
        &corpus.plans,
        cfg.epochs_master,
        cfg,
        seed,
        200,
        exec,
        |t, r| master_plan_loss(model, t, r),
        on_epoch,
    )
}

pub fn bc_train_answerer(
    model: &Nmc,
    store: &mut ParamStore,
    corpus: &PlanCorpus,
    cfg: &BcConfig,
    seed: u64,
    exec: Exec,
    on_epoch: impl FnMut(EpochStats),
) -> Result<Vec<EpochStats>, TrainError> {
    let examples = corpus.answer_examples();
    if examples.is_empty() {
        log::warn!("no answering examples; skipping");
        return Ok(Vec::new());
    }
    fit(
        store,
        &examples,
        cfg.epochs_answer,
        cfg,
        seed,
        300,
        exec,
        |t, e| answer_loss(model, t, e),
        on_epoch,
    )
}

/// Teacher-forced subgoal accuracy: (correct, total) over every decision.
pub fn teacher_forced_accuracy(
    model: &Nmc,
    store: &ParamStore,
    plans: &[PlanRecord],
    exec: Exec,
) -> Result<(usize, usize), TrainError> {
    let per_plan = exec.map(plans, |record| {
        let mut tape = Tape::new(store);
        let q = tape.input(record.question.encoding.clone());
        let mut h = model.zero_hidden(&mut tape);
        let mut prev = model.space.start_token();
        let mut correct = 0;
        for seg in &record.plan.segments {
            let v = tape.input(record.features[seg.start].clone());
            let out = model.master_step(&mut tape, q, v, prev, h)?;
            h = out.h;
            let label = model.space.index(seg.subgoal);
            if argmax(tape.value(out.log_probs)) == label {
                correct += 1;
            }
            prev = label;
        }
        Ok::<_, PolicyError>((correct, record.plan.segments.len()))
    });
    let mut acc = (0, 0);
    for r in per_plan {
        let (c, n) = r?;
        acc.0 += c;
        acc.1 += n;
    }
    Ok(acc)
}
