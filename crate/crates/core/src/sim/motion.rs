//! Agent pose, primitive actions and the transition function.

use serde::{Deserialize, Serialize};

use super::layout::HouseLayout;

/// Grid coordinates. `x` grows east, `y` grows south.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
        }
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn neighbors4(self) -> [Pos; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Heading {
        Self::ALL[i % 4]
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Heading {
        Self::from_index(self.index() + 1)
    }
}

/// Motion primitives understood by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motion {
    Forward,
    TurnLeft,
    TurnRight,
}

impl Motion {
    /// Tie-break order used by the expert planner.
    pub const ALL: [Motion; 3] = [Motion::Forward, Motion::TurnLeft, Motion::TurnRight];
}

/// Sub-policy output space: the three motions plus `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [
        Action::Forward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::Stop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    pub fn motion(self) -> Option<Motion> {
        match self {
            Action::Forward => Some(Motion::Forward),
            Action::TurnLeft => Some(Motion::TurnLeft),
            Action::TurnRight => Some(Motion::TurnRight),
            Action::Stop => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "turn-left",
            Action::TurnRight => "turn-right",
            Action::Stop => "stop",
        }
    }
}

impl From<Motion> for Action {
    fn from(m: Motion) -> Self {
        match m {
            Motion::Forward => Action::Forward,
            Motion::TurnLeft => Action::TurnLeft,
            Motion::TurnRight => Action::TurnRight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub cell: Pos,
    pub heading: Heading,
}

impl AgentState {
    pub fn new(cell: Pos, heading: Heading) -> Self {
        Self { cell, heading }
    }

    pub fn ahead(&self) -> Pos {
        let (dx, dy) = self.heading.delta();
        self.cell.offset(dx, dy)
    }
}

/// Applies one motion. Blocked forward moves leave the state unchanged and
/// report a collision; turns never collide.
pub fn step(house: &HouseLayout, state: AgentState, motion: Motion) -> (AgentState, bool) {
    match motion {
        Motion::TurnLeft => (
            AgentState {
                heading: state.heading.left(),
                ..state
            },
            false,
        ),
        Motion::TurnRight => (
            AgentState {
                heading: state.heading.right(),
                ..state
            },
            false,
        ),
        Motion::Forward => {
            let next = state.ahead();
            if house.is_traversable(next) {
                (
                    AgentState {
                        cell: next,
                        ..state
                    },
                    false,
                )
            } else {
                (state, true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turns_compose() {
        for h in Heading::ALL {
            assert_eq!(h.left().right(), h);
            assert_eq!(h.left().left().left().left(), h);
        }
        assert_eq!(Heading::N.left(), Heading::W);
        assert_eq!(Heading::N.right(), Heading::E);
    }
}
