//! What a sub-policy segment is trying to reach, and how success is judged.

use crate::planner::{Subgoal, Task, SUCCESS_RADIUS};
use crate::sim::geodesic::DistanceField;
use crate::sim::layout::RoomId;
use crate::sim::{AgentState, HouseLayout, Pos};

/// Target of one segment: distance field for shaped rewards plus the room
/// the segment started in (needed by the exit-room rule).
#[derive(Debug, Clone)]
pub struct SegmentGoal {
    pub subgoal: Subgoal,
    pub origin_room: Option<RoomId>,
    pub targets: Vec<Pos>,
    field: Option<DistanceField>,
}

impl SegmentGoal {
    /// Goal with explicit target cells (expert-derived targets in training).
    pub fn toward(
        house: &HouseLayout,
        subgoal: Subgoal,
        origin_room: Option<RoomId>,
        targets: Vec<Pos>,
    ) -> Self {
        let field = DistanceField::from_sources(house, &targets).ok();
        Self {
            subgoal,
            origin_room,
            targets,
            field,
        }
    }

    /// Goal resolved from the house alone, as when the master issues it:
    /// exit-room targets every cell outside the current room, find-room every
    /// cell of a room of that type, find-object every object of that type.
    pub fn resolve(house: &HouseLayout, subgoal: Subgoal, start: &AgentState) -> Self {
        let origin = house.room_at(start.cell);
        let targets: Vec<Pos> = match (subgoal.task, subgoal.arg) {
            (Task::ExitRoom, _) => house
                .rooms
                .iter()
                .filter(|r| Some(r.id) != origin)
                .flat_map(|r| r.extent.cells().collect::<Vec<_>>())
                .collect(),
            (Task::FindRoom, Some(t)) => house
                .rooms
                .iter()
                .filter(|r| r.room_type == t)
                .flat_map(|r| r.extent.cells().collect::<Vec<_>>())
                .collect(),
            (Task::FindObject, Some(t)) => house
                .objects
                .iter()
                .filter(|o| o.object_type == t)
                .map(|o| o.cell)
                .collect(),
            _ => Vec::new(),
        };
        Self::toward(house, subgoal, origin, targets)
    }

    /// Navigable distance to the nearest target, `None` when the goal has no
    /// reachable target in this house.
    pub fn distance(&self, p: Pos) -> Option<u32> {
        let d = self.field.as_ref()?.raw(p);
        (d != DistanceField::UNREACHABLE).then_some(d)
    }

    pub fn success(&self, house: &HouseLayout, state: &AgentState, stopped: bool) -> bool {
        judge_success(house, self.subgoal, self.origin_room, state, stopped)
    }
}

/// Success rules for a segment that ended at `state`:
/// exit-room stops inside a room other than the one it started in,
/// find-room stops inside a room of the requested type, find-object stops
/// within [`SUCCESS_RADIUS`] navigable cells of an object of that type.
/// Segments that ran out of budget never succeed.
pub fn judge_success(
    house: &HouseLayout,
    subgoal: Subgoal,
    origin_room: Option<RoomId>,
    state: &AgentState,
    stopped: bool,
) -> bool {
    if !stopped {
        return false;
    }
    match (subgoal.task, subgoal.arg) {
        (Task::ExitRoom, _) => house
            .room_at(state.cell)
            .is_some_and(|r| Some(r) != origin_room),
        (Task::FindRoom, Some(t)) => house.room_type_at(state.cell) == Some(t),
        (Task::FindObject, Some(t)) => {
            let field = match DistanceField::new(house, state.cell) {
                Ok(f) => f,
                Err(_) => return false,
            };
            house
                .objects
                .iter()
                .any(|o| o.object_type == t && field.raw(o.cell) <= SUCCESS_RADIUS)
        }
        _ => false,
    }
}
