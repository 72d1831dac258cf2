//! Lifting a primitive-action trajectory into a subgoal plan.
//!
//! The trajectory is cut wherever the agent first stands in a new room
//! (doorway cells belong to no room). The segment that ends at the target
//! is `find-object[type]`. An earlier segment is `exit-room` when its room
//! has exactly one usable doorway (doorways minus the one entered through),
//! otherwise `find-room[type of the next room]`. `answer` is appended with
//! an empty extent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::path::{ExpertTrajectory, SUCCESS_RADIUS};
use super::subgoal::{Subgoal, Task};
use crate::sim::layout::{DoorId, RoomId};
use crate::sim::{DistanceField, HouseLayout, Question};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("trajectory never enters a room")]
    NoRoom,
    #[error("trajectory ends in room {got:?}, target object is in room {want}")]
    WrongRoom { got: Option<RoomId>, want: RoomId },
    #[error("trajectory ends {0} cells from the target object")]
    TooFar(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub subgoal: Subgoal,
    /// Action indices `[start, end)` into the trajectory.
    pub start: usize,
    pub end: usize,
    /// Room the segment runs in.
    pub room: RoomId,
    /// Doorway the room was entered through, if any.
    pub entry_door: Option<DoorId>,
    /// Room reached at `end` (the destination room for the last motion segment).
    pub next_room: RoomId,
}

impl PlanSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedPlan {
    pub segments: Vec<PlanSegment>,
}

impl AnnotatedPlan {
    pub fn subgoals(&self) -> Vec<Subgoal> {
        self.segments.iter().map(|s| s.subgoal).collect()
    }

    /// Motion segments (everything but the trailing `answer`).
    pub fn motion_segments(&self) -> impl Iterator<Item = &PlanSegment> {
        self.segments
            .iter()
            .filter(|s| s.subgoal.task != Task::Answer)
    }
}

/// Doorways of `room`, not counting the one the agent entered through.
pub fn room_out_degree(house: &HouseLayout, room: RoomId, entry_door: Option<DoorId>) -> usize {
    house
        .doors_of(room)
        .filter(|d| Some(d.id) != entry_door)
        .count()
}

pub fn lift_trajectory(
    house: &HouseLayout,
    traj: &ExpertTrajectory,
    question: &Question,
) -> Result<AnnotatedPlan, LiftError> {
    let states = traj.states();
    let t_end = traj.len();
    let target = &house.objects[question.target_object];

    let first_room = states
        .iter()
        .find_map(|s| house.room_at(s.cell))
        .ok_or(LiftError::NoRoom)?;
    // (start index, room, entry door)
    let mut cuts: Vec<(usize, RoomId, Option<DoorId>)> = vec![(0, first_room, None)];
    let mut current = first_room;
    let mut last_door = None;
    for (t, s) in states.iter().enumerate().skip(1) {
        if let Some(d) = house.door_at(s.cell) {
            last_door = Some(d);
        }
        if let Some(r) = house.room_at(s.cell) {
            if r != current {
                cuts.push((t, r, last_door));
                current = r;
            }
        }
    }
    let end_room = house.room_at(traj.terminal.cell);
    if end_room != Some(target.room) || current != target.room {
        return Err(LiftError::WrongRoom {
            got: end_room,
            want: target.room,
        });
    }
    let d = DistanceField::new(house, target.cell)
        .map(|f| f.raw(traj.terminal.cell))
        .unwrap_or(u32::MAX);
    if d > SUCCESS_RADIUS {
        return Err(LiftError::TooFar(d));
    }

    let mut segments = Vec::with_capacity(cuts.len() + 1);
    for (k, &(start, room, entry)) in cuts.iter().enumerate() {
        let last = k + 1 == cuts.len();
        let (end, next_room) = if last {
            (t_end, room)
        } else {
            (cuts[k + 1].0, cuts[k + 1].1)
        };
        if start == end && !last {
            continue;
        }
        let subgoal = if last {
            Subgoal::find_object(target.object_type)
        } else if room_out_degree(house, room, entry) == 1 {
            Subgoal::EXIT_ROOM
        } else {
            Subgoal::find_room(house.rooms[next_room].room_type)
        };
        segments.push(PlanSegment {
            subgoal,
            start,
            end,
            room,
            entry_door: entry,
            next_room,
        });
    }
    segments.push(PlanSegment {
        subgoal: Subgoal::ANSWER,
        start: t_end,
        end: t_end,
        room: target.room,
        entry_door: None,
        next_room: target.room,
    });
    Ok(AnnotatedPlan { segments })
}
