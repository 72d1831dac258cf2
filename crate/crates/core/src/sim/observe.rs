//! Deterministic egocentric feature extractor.
//!
//! The feature vector is the concatenation of:
//! 1. occupancy patch: 3 rows ahead (including the agent's row) x 5 columns,
//!    1 for wall / out of bounds, 0 otherwise;
//! 2. one-hot of the current room type, with a trailing slot for doorways;
//! 3. multi-hot of object types visible in the view cone;
//! 4. multi-hot of visible object types within [`NEAR_RADIUS`] (Manhattan);
//! 5. multi-hot of the types of other rooms visible in the cone;
//! 6. visible doorway flags for the left / center / right sectors;
//! 7. one-hot color of the nearest visible object;
//! 8. heading as (sin, cos).
//!
//! The view cone spans 90 degrees, reaches [`VIEW_RANGE`] cells and is
//! blocked by walls.

use super::layout::{CellKind, HouseLayout};
use super::motion::{AgentState, Pos};
use super::vocab::VocabSizes;

pub const VIEW_RANGE: i32 = 6;
pub const NEAR_RADIUS: i32 = 3;
pub const PATCH_ROWS: i32 = 3;
pub const PATCH_HALF_WIDTH: i32 = 2;
const PATCH_LEN: usize = (PATCH_ROWS * (2 * PATCH_HALF_WIDTH + 1)) as usize;

/// Offsets of each feature group for a given vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub vocab: VocabSizes,
    pub patch: usize,
    pub room: usize,
    pub objects: usize,
    pub near: usize,
    pub rooms_seen: usize,
    pub doors: usize,
    pub color: usize,
    pub heading: usize,
    pub dim: usize,
}

impl FeatureLayout {
    pub fn new(vocab: VocabSizes) -> Self {
        let patch = 0;
        let room = patch + PATCH_LEN;
        let objects = room + vocab.room_types + 1;
        let near = objects + vocab.object_types;
        let rooms_seen = near + vocab.object_types;
        let doors = rooms_seen + vocab.room_types;
        let color = doors + 3;
        let heading = color + vocab.colors;
        let dim = heading + 2;
        Self {
            vocab,
            patch,
            room,
            objects,
            near,
            rooms_seen,
            doors,
            color,
            heading,
            dim,
        }
    }

    /// Index of a patch cell `forward` rows ahead and `lateral` columns to
    /// the right (negative is left).
    pub fn patch_index(&self, forward: i32, lateral: i32) -> usize {
        debug_assert!((0..PATCH_ROWS).contains(&forward) && lateral.abs() <= PATCH_HALF_WIDTH);
        self.patch + (forward * (2 * PATCH_HALF_WIDTH + 1) + lateral + PATCH_HALF_WIDTH) as usize
    }
}

/// Egocentric frame: unit forward and right vectors.
fn frame(state: &AgentState) -> ((i32, i32), (i32, i32)) {
    let (fx, fy) = state.heading.delta();
    ((fx, fy), (-fy, fx))
}

/// World cell at (forward, lateral) from the agent.
pub fn ego_to_world(state: &AgentState, forward: i32, lateral: i32) -> Pos {
    let ((fx, fy), (rx, ry)) = frame(state);
    state
        .cell
        .offset(forward * fx + lateral * rx, forward * fy + lateral * ry)
}

/// (forward, lateral) coordinates of a world cell.
pub fn world_to_ego(state: &AgentState, p: Pos) -> (i32, i32) {
    let ((fx, fy), (rx, ry)) = frame(state);
    let (dx, dy) = (p.x - state.cell.x, p.y - state.cell.y);
    (dx * fx + dy * fy, dx * rx + dy * ry)
}

pub fn in_cone(forward: i32, lateral: i32) -> bool {
    (forward == 0 && lateral == 0)
        || (forward >= 1
            && lateral.abs() <= forward
            && forward * forward + lateral * lateral <= VIEW_RANGE * VIEW_RANGE)
}

/// True when no wall cell's open interior meets the segment joining the two
/// cell centers (endpoints excluded). Walks the cells the segment crosses;
/// exact corner crossings step diagonally.
pub fn line_of_sight(house: &HouseLayout, from: Pos, to: Pos) -> bool {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let (sx, sy) = (dx.signum(), dy.signum());
    let (ax, ay) = (dx.abs() as i64, dy.abs() as i64);
    // next x-boundary at t = (2i+1) / (2ax), y-boundary at (2j+1) / (2ay)
    let (mut i, mut j) = (0i64, 0i64);
    let mut cur = from;
    loop {
        let step_x = i < ax;
        let step_y = j < ay;
        if !step_x && !step_y {
            return true;
        }
        let ord = match (step_x, step_y) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            _ => ((2 * i + 1) * ay).cmp(&((2 * j + 1) * ax)),
        };
        match ord {
            std::cmp::Ordering::Less => {
                cur = cur.offset(sx, 0);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                cur = cur.offset(0, sy);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                cur = cur.offset(sx, sy);
                i += 1;
                j += 1;
            }
        }
        if cur != to && house.cell(cur) == CellKind::Wall {
            return false;
        }
    }
}

/// Whether `target` lies in the agent's view cone with a clear line of sight.
pub fn visible(house: &HouseLayout, state: &AgentState, target: Pos) -> bool {
    let (f, l) = world_to_ego(state, target);
    in_cone(f, l) && house.in_bounds(target) && line_of_sight(house, state.cell, target)
}

/// All cells currently visible, in a fixed scan order.
pub fn visible_cells(house: &HouseLayout, state: &AgentState) -> Vec<Pos> {
    let mut out = vec![state.cell];
    for f in 1..=VIEW_RANGE {
        for l in -f..=f {
            if !in_cone(f, l) {
                continue;
            }
            let p = ego_to_world(state, f, l);
            if house.in_bounds(p) && line_of_sight(house, state.cell, p) {
                out.push(p);
            }
        }
    }
    out
}

pub fn observe(house: &HouseLayout, state: &AgentState) -> Vec<f64> {
    let layout = FeatureLayout::new(house.vocab);
    let mut v = vec![0.0; layout.dim];

    for f in 0..PATCH_ROWS {
        for l in -PATCH_HALF_WIDTH..=PATCH_HALF_WIDTH {
            if house.is_wall(ego_to_world(state, f, l)) {
                v[layout.patch_index(f, l)] = 1.0;
            }
        }
    }

    let here = house.room_at(state.cell);
    match here {
        Some(r) => v[layout.room + house.rooms[r].room_type] = 1.0,
        None => v[layout.room + house.vocab.room_types] = 1.0,
    }

    let mut nearest: Option<(i32, usize, usize)> = None;
    for o in &house.objects {
        if !visible(house, state, o.cell) {
            continue;
        }
        v[layout.objects + o.object_type] = 1.0;
        if o.cell.manhattan(state.cell) <= NEAR_RADIUS {
            v[layout.near + o.object_type] = 1.0;
        }
        let (dx, dy) = (o.cell.x - state.cell.x, o.cell.y - state.cell.y);
        let key = (dx * dx + dy * dy, o.id, o.color);
        if nearest.is_none_or(|n| (key.0, key.1) < (n.0, n.1)) {
            nearest = Some(key);
        }
    }
    if let Some((_, _, color)) = nearest {
        v[layout.color + color] = 1.0;
    }

    for p in visible_cells(house, state) {
        if let Some(r) = house.room_at(p) {
            if Some(r) != here {
                v[layout.rooms_seen + house.rooms[r].room_type] = 1.0;
            }
        }
        if p != state.cell && house.cell(p) == CellKind::Doorway {
            let (f, l) = world_to_ego(state, p);
            let sector = if 3 * l.abs() <= f {
                1
            } else if l < 0 {
                0
            } else {
                2
            };
            v[layout.doors + sector] = 1.0;
        }
    }

    let (s, c) = match state.heading.index() {
        0 => (0.0, 1.0),
        1 => (1.0, 0.0),
        2 => (0.0, -1.0),
        _ => (-1.0, 0.0),
    };
    v[layout.heading] = s;
    v[layout.heading + 1] = c;
    v
}
