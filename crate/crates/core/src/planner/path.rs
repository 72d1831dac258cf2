//! Expert shortest paths over the (cell, heading) state graph.
//!
//! Every primitive action costs 1. Among equal-cost plans the one that is
//! lexicographically smallest under forward < turn-left < turn-right wins:
//! breadth-first search expanding actions in that order discovers each state
//! first along exactly that plan.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::layout::ObjectId;
use crate::sim::observe::visible;
use crate::sim::{step, AgentState, DistanceField, Heading, HouseLayout, Motion, Pos};

/// Find-object success radius in cells (0.75 m).
pub const SUCCESS_RADIUS: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("start cell ({0},{1}) is not traversable")]
    BadStart(i32, i32),
    #[error("no goal state is reachable from ({0},{1})")]
    Unreachable(i32, i32),
    #[error("object {0} does not exist")]
    NoSuchObject(ObjectId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertTrajectory {
    pub steps: Vec<(AgentState, Motion)>,
    pub terminal: AgentState,
}

impl ExpertTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// States s_0..s_T (T+1 entries).
    pub fn states(&self) -> Vec<AgentState> {
        self.steps
            .iter()
            .map(|(s, _)| *s)
            .chain(std::iter::once(self.terminal))
            .collect()
    }

    pub fn actions(&self) -> Vec<Motion> {
        self.steps.iter().map(|(_, a)| *a).collect()
    }

    pub fn from_states(states: &[AgentState], actions: &[Motion]) -> Self {
        assert_eq!(states.len(), actions.len() + 1);
        Self {
            steps: states
                .iter()
                .copied()
                .zip(actions.iter().copied())
                .collect(),
            terminal: *states.last().unwrap(),
        }
    }
}

fn state_index(house: &HouseLayout, s: &AgentState) -> usize {
    (s.cell.y as usize * house.width + s.cell.x as usize) * 4 + s.heading.index()
}

fn index_state(house: &HouseLayout, i: usize) -> AgentState {
    let c = i / 4;
    AgentState::new(
        Pos::new((c % house.width) as i32, (c / house.width) as i32),
        Heading::from_index(i % 4),
    )
}

/// Shortest action sequence from `start` to any state satisfying `goal`.
pub fn shortest_path_to<G>(
    house: &HouseLayout,
    start: AgentState,
    goal: G,
) -> Result<ExpertTrajectory, PathError>
where
    G: Fn(&AgentState) -> bool,
{
    if !house.is_traversable(start.cell) {
        return Err(PathError::BadStart(start.cell.x, start.cell.y));
    }
    if goal(&start) {
        return Ok(ExpertTrajectory {
            steps: vec![],
            terminal: start,
        });
    }
    let n = house.width * house.height * 4;
    let mut parent: Vec<Option<(usize, Motion)>> = vec![None; n];
    let mut seen = vec![false; n];
    let s0 = state_index(house, &start);
    seen[s0] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let si = state_index(house, &s);
        for m in Motion::ALL {
            let (next, collided) = step(house, s, m);
            if collided {
                continue;
            }
            let ni = state_index(house, &next);
            if seen[ni] {
                continue;
            }
            seen[ni] = true;
            parent[ni] = Some((si, m));
            if goal(&next) {
                let mut rev = Vec::new();
                let mut cur = ni;
                while let Some((p, m)) = parent[cur] {
                    rev.push((index_state(house, p), m));
                    cur = p;
                }
                rev.reverse();
                return Ok(ExpertTrajectory {
                    steps: rev,
                    terminal: next,
                });
            }
            queue.push_back(next);
        }
    }
    Err(PathError::Unreachable(start.cell.x, start.cell.y))
}

/// Goal test for reaching an object: inside the object's room, within
/// [`SUCCESS_RADIUS`] navigable cells, with the object in view.
pub struct ObjectGoal<'a> {
    house: &'a HouseLayout,
    object: ObjectId,
    field: DistanceField,
}

impl<'a> ObjectGoal<'a> {
    pub fn new(house: &'a HouseLayout, object: ObjectId) -> Result<Self, PathError> {
        let o = house
            .objects
            .get(object)
            .ok_or(PathError::NoSuchObject(object))?;
        let field =
            DistanceField::new(house, o.cell).map_err(|_| PathError::NoSuchObject(object))?;
        Ok(Self {
            house,
            object,
            field,
        })
    }

    pub fn distance(&self, p: Pos) -> u32 {
        self.field.raw(p)
    }

    pub fn field(&self) -> &DistanceField {
        &self.field
    }

    pub fn reached(&self, s: &AgentState) -> bool {
        let o = &self.house.objects[self.object];
        self.house.room_at(s.cell) == Some(o.room)
            && self.field.raw(s.cell) <= SUCCESS_RADIUS
            && visible(self.house, s, o.cell)
    }
}

/// Expert trajectory from `start` to the object standing on `target_cell`.
pub fn shortest_path(
    house: &HouseLayout,
    start: AgentState,
    target_cell: Pos,
) -> Result<ExpertTrajectory, PathError> {
    let object = house
        .objects
        .iter()
        .find(|o| o.cell == target_cell)
        .map(|o| o.id)
        .ok_or(PathError::Unreachable(target_cell.x, target_cell.y))?;
    shortest_path_to_object(house, start, object)
}

pub fn shortest_path_to_object(
    house: &HouseLayout,
    start: AgentState,
    object: ObjectId,
) -> Result<ExpertTrajectory, PathError> {
    let goal = ObjectGoal::new(house, object)?;
    shortest_path_to(house, start, |s| goal.reached(s))
}
