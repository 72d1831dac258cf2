//! Master subgoal-sequence agreement with expert plans.
//!
//! The master is teacher-forced: at every expert segment start it sees the
//! expert state and the expert's previous subgoal, and its greedy choice is
//! recorded. Predicted and expert token lists are then compared by IoU.

use std::collections::BTreeMap;

use rand::Rng;

use crate::par::Exec;
use crate::planner::{PlanRecord, Subgoal};
use crate::policy::{argmax, Nmc, PolicyError};
use crate::tensor::{ParamStore, Tape};
use crate::util::rng_for;

fn counts(xs: &[Subgoal]) -> BTreeMap<Subgoal, usize> {
    let mut m = BTreeMap::new();
    for &x in xs {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

/// Multiset IoU: Σ min(count) / Σ max(count). Two empty lists score 1.
pub fn multiset_iou(a: &[Subgoal], b: &[Subgoal]) -> f64 {
    let (ca, cb) = (counts(a), counts(b));
    let mut inter = 0;
    let mut union = 0;
    for k in ca.keys().chain(cb.keys().filter(|k| !ca.contains_key(k))) {
        let (x, y) = (
            ca.get(k).copied().unwrap_or(0),
            cb.get(k).copied().unwrap_or(0),
        );
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn lcs(a: &[Subgoal], b: &[Subgoal]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Order-sensitive variant: |LCS| / (|a| + |b| - |LCS|).
pub fn sequence_iou(a: &[Subgoal], b: &[Subgoal]) -> f64 {
    let l = lcs(a, b);
    let union = a.len() + b.len() - l;
    if union == 0 {
        1.0
    } else {
        l as f64 / union as f64
    }
}

pub fn iou(a: &[Subgoal], b: &[Subgoal], sequence: bool) -> f64 {
    if sequence {
        sequence_iou(a, b)
    } else {
        multiset_iou(a, b)
    }
}

/// Greedy teacher-forced master predictions, one per expert segment.
pub fn predicted_sequence(
    model: &Nmc,
    store: &ParamStore,
    record: &PlanRecord,
) -> Result<Vec<Subgoal>, PolicyError> {
    let mut tape = Tape::new(store);
    let q = tape.input(record.question.encoding.clone());
    let mut h = model.zero_hidden(&mut tape);
    let mut prev = model.space.start_token();
    let mut out = Vec::with_capacity(record.plan.segments.len());
    for seg in &record.plan.segments {
        let v = tape.input(record.features[seg.start].clone());
        let step = model.master_step(&mut tape, q, v, prev, h)?;
        h = step.h;
        out.push(model.space.subgoal(argmax(tape.value(step.log_probs))));
        prev = model.space.index(seg.subgoal);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouReport {
    pub mean: f64,
    pub episodes: usize,
}

fn mean(xs: &[f64]) -> IouReport {
    let n = xs.len();
    IouReport {
        mean: if n == 0 {
            0.0
        } else {
            xs.iter().sum::<f64>() / n as f64
        },
        episodes: n,
    }
}

pub fn eval_master_iou(
    model: &Nmc,
    store: &ParamStore,
    plans: &[PlanRecord],
    sequence: bool,
    exec: Exec,
) -> Result<IouReport, PolicyError> {
    let scores = exec.map(plans, |r| {
        let truth: Vec<Subgoal> = r.plan.subgoals();
        predicted_sequence(model, store, r).map(|p| iou(&p, &truth, sequence))
    });
    Ok(mean(&scores.into_iter().collect::<Result<Vec<_>, _>>()?))
}

/// Baseline: each position drawn uniformly from the whole subgoal space.
pub fn random_sequence_iou(
    model: &Nmc,
    plans: &[PlanRecord],
    sequence: bool,
    seed: u64,
) -> IouReport {
    let n = model.space.len();
    let scores: Vec<f64> = plans
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = rng_for(seed, &[0x696f75, i as u64]);
            let truth = r.plan.subgoals();
            let guess: Vec<Subgoal> = truth
                .iter()
                .map(|_| model.space.subgoal(rng.gen_range(0..n)))
                .collect();
            iou(&guess, &truth, sequence)
        })
        .collect();
    mean(&scores)
}
