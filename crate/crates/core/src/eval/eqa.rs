//! Question-answering navigation metrics at fixed spawn offsets.
//!
//! For each held-out question the expert path is planned from the room cell
//! farthest from the target; the agent then spawns `k` primitive actions
//! before the end of that path. Paths shorter than `k` spawn at their start
//! and are counted as truncated.

use serde::{Deserialize, Serialize};

use super::report::MetricReport;
use super::EvalError;
use crate::par::Exec;
use crate::planner::shortest_path_to_object;
use crate::policy::{Budgets, EpisodeRecord, Mode, Nmc, Rollout};
use crate::sim::{AgentState, DistanceField, Heading, HouseLayout, Question};
use crate::tensor::ParamStore;
use crate::train::RewardConfig;
use crate::util::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqaCase {
    pub house: usize,
    pub question: usize,
    pub offset: usize,
    pub spawn: AgentState,
    pub truncated: bool,
}

/// Room cell with the largest navigable distance to the target object
/// (first in row-major order on ties), facing north.
pub fn farthest_spawn(house: &HouseLayout, q: &Question) -> Option<AgentState> {
    let field = DistanceField::new(house, house.objects.get(q.target_object)?.cell).ok()?;
    let mut best: Option<(u32, crate::sim::Pos)> = None;
    for room in &house.rooms {
        for c in room.extent.cells() {
            let d = field.raw(c);
            if d == DistanceField::UNREACHABLE {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bc)) => d > bd || (d == bd && (c.y, c.x) < (bc.y, bc.x)),
            };
            if better {
                best = Some((d, c));
            }
        }
    }
    best.map(|(_, c)| AgentState::new(c, Heading::N))
}

/// Spawn cases for every (house, question, offset). Questions whose target
/// cannot be reached are left out.
pub fn eqa_cases(houses: &[(HouseLayout, Vec<Question>)], offsets: &[usize]) -> Vec<EqaCase> {
    let mut out = Vec::new();
    for (hi, (house, questions)) in houses.iter().enumerate() {
        for (qi, q) in questions.iter().enumerate() {
            let Some(far) = farthest_spawn(house, q) else {
                continue;
            };
            let Ok(traj) = shortest_path_to_object(house, far, q.target_object) else {
                continue;
            };
            let states = traj.states();
            let t = states.len() - 1;
            for &k in offsets {
                out.push(EqaCase {
                    house: hi,
                    question: qi,
                    offset: k,
                    spawn: states[t.saturating_sub(k)],
                    truncated: t < k,
                });
            }
        }
    }
    out
}

/// Per-episode numbers; `d_delta = d0 - d_T` in cells, positive when the
/// agent ended closer than it started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub offset: usize,
    pub d0: f64,
    pub d_t: f64,
    pub d_delta: f64,
    pub correct: bool,
    pub truncated: bool,
}

impl EpisodeMetrics {
    pub fn new(offset: usize, d0: u32, d_t: u32, correct: bool, truncated: bool) -> Self {
        let (d0, d_t) = (d0 as f64, d_t as f64);
        Self {
            offset,
            d0,
            d_t,
            d_delta: d0 - d_t,
            correct,
            truncated,
        }
    }

    pub fn from_record(case: &EqaCase, ep: &EpisodeRecord) -> Self {
        Self::new(case.offset, ep.d0, ep.d_t, ep.correct, case.truncated)
    }
}

/// Report rows for every offset present in `eps`, scope `T-<k>`.
pub fn aggregate(eps: &[EpisodeMetrics]) -> MetricReport {
    let mut offsets: Vec<usize> = eps.iter().map(|e| e.offset).collect();
    offsets.sort_unstable();
    offsets.dedup();
    let mut report = MetricReport::default();
    for k in offsets {
        let sel: Vec<&EpisodeMetrics> = eps.iter().filter(|e| e.offset == k).collect();
        let n = sel.len();
        let mean =
            |f: &dyn Fn(&EpisodeMetrics) -> f64| sel.iter().map(|e| f(e)).sum::<f64>() / n as f64;
        let scope = format!("T-{k}");
        report.push("d0", &scope, n, mean(&|e| e.d0));
        report.push("d_T", &scope, n, mean(&|e| e.d_t));
        report.push("d_delta", &scope, n, mean(&|e| e.d_delta));
        report.push("accuracy", &scope, n, mean(&|e| e.correct as u8 as f64));
        report.push(
            "truncated",
            &scope,
            n,
            sel.iter().filter(|e| e.truncated).count() as f64,
        );
    }
    report
}

#[derive(Debug, Clone)]
pub struct EqaRun {
    pub report: MetricReport,
    pub cases: Vec<EqaCase>,
    pub episodes: Vec<EpisodeRecord>,
    pub metrics: Vec<EpisodeMetrics>,
}

/// Fails when any evaluation house was used for training.
pub fn check_disjoint(
    houses: &[(HouseLayout, Vec<Question>)],
    train_ids: &[u64],
) -> Result<(), EvalError> {
    match houses.iter().find(|(h, _)| train_ids.contains(&h.id)) {
        Some((h, _)) => Err(EvalError::Overlap(h.id)),
        None => Ok(()),
    }
}

/// Greedy episodes for every case. Reads `store` only.
#[allow(clippy::too_many_arguments)]
pub fn eval_eqa(
    model: &Nmc,
    store: &ParamStore,
    houses: &[(HouseLayout, Vec<Question>)],
    offsets: &[usize],
    budgets: Budgets,
    train_ids: &[u64],
    seed: u64,
    exec: Exec,
) -> Result<EqaRun, EvalError> {
    check_disjoint(houses, train_ids)?;
    let cases = eqa_cases(houses, offsets);
    let roll = Rollout {
        model,
        store,
        budgets,
        mode: Mode::Greedy,
        sub_mode: Mode::Greedy,
        rewards: RewardConfig::default(),
    };
    let results = exec.map_range(cases.len(), |i| {
        let c = &cases[i];
        let (house, questions) = &houses[c.house];
        let mut rng = rng_for(seed, &[0x657161, i as u64]);
        roll.episode(house, &questions[c.question], c.spawn, &mut rng)
    });
    let episodes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let metrics: Vec<EpisodeMetrics> = cases
        .iter()
        .zip(&episodes)
        .map(|(c, e)| EpisodeMetrics::from_record(c, e))
        .collect();
    Ok(EqaRun {
        report: aggregate(&metrics),
        cases,
        episodes,
        metrics,
    })
}

/// Name of the regime that has both lower d_T and higher accuracy at an
/// offset, if either does.
pub fn better_regime<'a>(
    a: (&'a str, &MetricReport),
    b: (&'a str, &MetricReport),
    offset: usize,
) -> Option<&'a str> {
    let scope = format!("T-{offset}");
    let get = |r: &MetricReport, m: &str| r.value(m, &scope);
    let (ad, aa) = (get(a.1, "d_T")?, get(a.1, "accuracy")?);
    let (bd, ba) = (get(b.1, "d_T")?, get(b.1, "accuracy")?);
    if ad < bd && aa > ba {
        Some(a.0)
    } else if bd < ad && ba > aa {
        Some(b.0)
    } else {
        None
    }
}
