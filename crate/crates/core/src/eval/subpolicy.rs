//! Sub-policy success on held-out houses.
//!
//! Spawns are placed in suitable rooms: exit-room in rooms with a single
//! doorway, find-room in rooms with at least two doorways (aimed at the
//! type of a neighboring room), find-object in rooms holding an object whose
//! type is unique there.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::par::Exec;
use crate::planner::{shortest_path_to, Subgoal, Task, SUCCESS_RADIUS};
use crate::policy::{run_segment, Budgets, Mode, Nmc, PolicyError, Rollout, Segment, SegmentGoal};
use crate::sim::{Action, AgentState, Heading, HouseLayout, Question};
use crate::tensor::ParamStore;
use crate::train::RewardConfig;
use crate::util::rng_for;

/// One evaluation spawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubCase {
    pub house: usize,
    pub subgoal: Subgoal,
    pub spawn: AgentState,
}

fn suitable(house: &HouseLayout, task: Task) -> Vec<(usize, Subgoal)> {
    let mut out = Vec::new();
    for room in &house.rooms {
        let doors = house.doors_of(room.id).count();
        match task {
            Task::ExitRoom if doors == 1 => out.push((room.id, Subgoal::EXIT_ROOM)),
            Task::FindRoom if doors >= 2 => {
                let mut types: Vec<usize> = house
                    .neighbors(room.id)
                    .into_iter()
                    .map(|r| house.rooms[r].room_type)
                    .filter(|&t| t != room.room_type)
                    .collect();
                types.sort_unstable();
                types.dedup();
                out.extend(types.into_iter().map(|t| (room.id, Subgoal::find_room(t))));
            }
            Task::FindObject => {
                let mut types: Vec<usize> =
                    house.objects_in(room.id).map(|o| o.object_type).collect();
                types.sort_unstable();
                let unique: Vec<usize> = types
                    .iter()
                    .copied()
                    .filter(|t| types.iter().filter(|u| *u == t).count() == 1)
                    .collect();
                out.extend(
                    unique
                        .into_iter()
                        .map(|t| (room.id, Subgoal::find_object(t))),
                );
            }
            _ => {}
        }
    }
    out
}

/// `n` seeded spawns for a task, spread round-robin over the houses.
/// Houses without a suitable room are skipped; returns the cases and the
/// number of houses skipped.
pub fn sub_cases(
    houses: &[(HouseLayout, Vec<Question>)],
    task: Task,
    n: usize,
    seed: u64,
) -> (Vec<SubCase>, usize) {
    let options: Vec<Vec<(usize, Subgoal)>> =
        houses.iter().map(|(h, _)| suitable(h, task)).collect();
    let usable: Vec<usize> = (0..houses.len())
        .filter(|&i| !options[i].is_empty())
        .collect();
    let skipped = houses.len() - usable.len();
    let mut cases = Vec::with_capacity(n);
    if usable.is_empty() {
        return (cases, skipped);
    }
    let mut rng = rng_for(seed, &[0x7375_6263, task as u64]);
    for k in 0..n {
        let hi = usable[k % usable.len()];
        let house = &houses[hi].0;
        let &(room, subgoal) = options[hi].choose(&mut rng).expect("non-empty");
        let cells: Vec<_> = house.rooms[room].extent.cells().collect();
        let cell = *cells.choose(&mut rng).expect("room has cells");
        let spawn = AgentState::new(cell, Heading::from_index(rng.gen_range(0..4)));
        cases.push(SubCase {
            house: hi,
            subgoal,
            spawn,
        });
    }
    (cases, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubAgent {
    /// Learned policy, argmax actions.
    Learned,
    /// Learned policy, actions sampled from its distribution.
    Sampled,
    /// Uniform over forward / left / right / stop.
    Random,
    /// Replays a shortest path to the success region, then stops.
    Expert,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubEval {
    pub task: Task,
    pub episodes: usize,
    pub successes: usize,
    pub skipped_houses: usize,
    pub segments: Vec<Segment>,
}

impl SubEval {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Expert action list for a case: shortest path into the success region.
/// For find-object the region is read off the goal's own distance field
/// (grid distance is symmetric), which avoids a search per visited state.
pub fn expert_actions(
    house: &HouseLayout,
    goal: &SegmentGoal,
    start: AgentState,
) -> Option<Vec<Action>> {
    let inside = |s: &AgentState| match goal.subgoal.task {
        Task::FindObject => goal.distance(s.cell).is_some_and(|d| d <= SUCCESS_RADIUS),
        _ => goal.success(house, s, true),
    };
    let path = shortest_path_to(house, start, inside).ok()?;
    let mut acts: Vec<Action> = path.actions().into_iter().map(Action::from).collect();
    acts.push(Action::Stop);
    Some(acts)
}

#[allow(clippy::too_many_arguments)]
pub fn eval_subpolicy(
    model: &Nmc,
    store: &ParamStore,
    houses: &[(HouseLayout, Vec<Question>)],
    task: Task,
    n: usize,
    agent: SubAgent,
    budgets: Budgets,
    seed: u64,
    exec: Exec,
) -> Result<SubEval, PolicyError> {
    let (cases, skipped) = sub_cases(houses, task, n, seed);
    let rewards = RewardConfig::default();
    let segments = exec.map_range(cases.len(), |k| {
        let case = cases[k];
        let house = &houses[case.house].0;
        let goal = SegmentGoal::resolve(house, case.subgoal, &case.spawn);
        let mut frames = Vec::new();
        let mut rng = rng_for(seed, &[0x6570, task as u64, k as u64]);
        match agent {
            SubAgent::Learned | SubAgent::Sampled => {
                let mode = if agent == SubAgent::Sampled {
                    Mode::Sample
                } else {
                    Mode::Greedy
                };
                let roll = Rollout {
                    model,
                    store,
                    budgets,
                    mode,
                    sub_mode: mode,
                    rewards,
                };
                roll.segment(
                    house,
                    &goal,
                    case.spawn,
                    budgets.per_subgoal,
                    &mut frames,
                    &mut rng,
                )
            }
            SubAgent::Random => {
                let lp = (0.25f64).ln();
                let mut actor = |_: &[f64], _: Option<Action>| {
                    Ok((Action::from_index(rng.gen_range(0..4)), lp, 0.0))
                };
                run_segment(
                    house,
                    &goal,
                    case.spawn,
                    budgets.per_subgoal,
                    &rewards,
                    &mut frames,
                    &mut actor,
                )
            }
            SubAgent::Expert => {
                let plan =
                    expert_actions(house, &goal, case.spawn).unwrap_or_else(|| vec![Action::Stop]);
                let mut it = plan.into_iter();
                let mut actor = |_: &[f64], _: Option<Action>| {
                    Ok((it.next().unwrap_or(Action::Stop), 0.0, 0.0))
                };
                run_segment(
                    house,
                    &goal,
                    case.spawn,
                    budgets.per_subgoal,
                    &rewards,
                    &mut frames,
                    &mut actor,
                )
            }
        }
    });
    let segments = segments.into_iter().collect::<Result<Vec<_>, _>>()?;
    let successes = segments.iter().filter(|s| s.success).count();
    Ok(SubEval {
        task,
        episodes: segments.len(),
        successes,
        skipped_houses: skipped,
        segments,
    })
}
