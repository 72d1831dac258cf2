//! Independent re-check of recorded trajectories: re-walks the logged
//! actions through the simulator and re-judges success from the walk alone.

use thiserror::Error;

use crate::policy::{judge_success, EpisodeRecord, Segment};
use crate::sim::{step, Action, AgentState, DistanceField, HouseLayout};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("step {step}: logged state {logged:?} but replay reached {replayed:?}")]
    StateMismatch {
        step: usize,
        logged: AgentState,
        replayed: AgentState,
    },
    #[error("step {step}: logged collision flag {logged} disagrees with replay")]
    CollisionMismatch { step: usize, logged: bool },
    #[error("segment end {logged:?} disagrees with replay {replayed:?}")]
    EndMismatch {
        logged: AgentState,
        replayed: AgentState,
    },
    #[error("logged success {logged} disagrees with the rules")]
    SuccessMismatch { logged: bool },
    #[error("logged distance {logged} disagrees with replay {replayed}")]
    DistanceMismatch { logged: u32, replayed: u32 },
    #[error("target object {0} is not in the house")]
    NoTarget(usize),
}

/// Replays a segment and returns the success judged from the walk.
pub fn replay_segment(house: &HouseLayout, seg: &Segment) -> Result<bool, ReplayError> {
    let mut state = seg.start;
    let mut stopped = false;
    for (k, s) in seg.steps.iter().enumerate() {
        if s.state != state {
            return Err(ReplayError::StateMismatch {
                step: k,
                logged: s.state,
                replayed: state,
            });
        }
        if s.action == Action::Stop {
            stopped = true;
            break;
        }
        let m = s.action.motion().expect("non-stop action moves");
        let (next, collided) = step(house, state, m);
        if collided != s.collided {
            return Err(ReplayError::CollisionMismatch {
                step: k,
                logged: s.collided,
            });
        }
        state = next;
    }
    if state != seg.end {
        return Err(ReplayError::EndMismatch {
            logged: seg.end,
            replayed: state,
        });
    }
    let ok = judge_success(house, seg.subgoal, seg.origin_room, &state, stopped);
    if ok != seg.success {
        return Err(ReplayError::SuccessMismatch {
            logged: seg.success,
        });
    }
    Ok(ok)
}

/// Replays every segment of an episode and re-derives d0 and d_T.
pub fn replay_episode(house: &HouseLayout, ep: &EpisodeRecord) -> Result<(), ReplayError> {
    let mut at = ep.spawn;
    for seg in &ep.segments {
        if seg.start != at {
            return Err(ReplayError::StateMismatch {
                step: 0,
                logged: seg.start,
                replayed: at,
            });
        }
        replay_segment(house, seg)?;
        at = seg.end;
    }
    let target = house
        .objects
        .get(ep.target_object)
        .ok_or(ReplayError::NoTarget(ep.target_object))?;
    let field = DistanceField::new(house, target.cell)
        .map_err(|_| ReplayError::NoTarget(ep.target_object))?;
    for (logged, cell) in [(ep.d0, ep.spawn.cell), (ep.d_t, at.cell)] {
        let replayed = field.raw(cell);
        if logged != replayed {
            return Err(ReplayError::DistanceMismatch { logged, replayed });
        }
    }
    Ok(())
}
