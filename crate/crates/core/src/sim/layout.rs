//! The house model and its procedural generator.
//!
//! Houses are a corridor ("hall") running across the middle of the grid with
//! rooms on both sides, each opening onto the corridor through one doorway.
//! Neighbouring rooms may share an extra doorway. One- and two-room houses
//! skip the corridor. Walls are one cell thick and doorways are single cells
//! cut into them, so a doorway cell belongs to no room.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::motion::Pos;
use super::vocab::{Vocab, VocabSizes};
use crate::util::rng_for;

/// Meters per grid cell.
pub const CELL_METERS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Free,
    Wall,
    Doorway,
}

pub type RoomId = usize;
pub type DoorId = usize;
pub type ObjectId = usize;

/// Inclusive rectangle of free cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Rect {
    pub fn contains(&self, p: Pos) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| Pos::new(x, y)))
    }

    pub fn area(&self) -> usize {
        ((self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub room_type: usize,
    pub extent: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doorway {
    pub id: DoorId,
    pub cell: Pos,
    pub room_a: RoomId,
    pub room_b: RoomId,
}

impl Doorway {
    pub fn other(&self, room: RoomId) -> Option<RoomId> {
        if self.room_a == room {
            Some(self.room_b)
        } else if self.room_b == room {
            Some(self.room_a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub id: ObjectId,
    pub object_type: usize,
    pub color: usize,
    pub cell: Pos,
    pub room: RoomId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub width: usize,
    pub height: usize,
    pub rooms_min: usize,
    pub rooms_max: usize,
    pub objects_min: usize,
    pub objects_max: usize,
    /// Smallest room side, in free cells.
    pub min_room_span: usize,
    pub corridor_width: usize,
    /// Chance that two side-by-side rooms also share a doorway.
    pub extra_door_prob: f64,
    /// Chance that an object is drawn from its home room type's set.
    pub affinity: f64,
    pub vocab: VocabSizes,
    pub max_retries: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            rooms_min: 3,
            rooms_max: 6,
            objects_min: 1,
            objects_max: 3,
            min_room_span: 3,
            corridor_width: 2,
            extra_door_prob: 0.25,
            affinity: 0.9,
            vocab: VocabSizes::default(),
            max_retries: 16,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("could not build a house after {attempts} attempts: {reason}")]
    Construction { attempts: usize, reason: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("free cell ({0},{1}) belongs to {2} rooms")]
    FreeCellOwnership(i32, i32, usize),
    #[error("room cell ({0},{1}) is not free")]
    RoomCellNotFree(i32, i32),
    #[error("room graph is disconnected")]
    Disconnected,
    #[error("doorway {0} is invalid: {1}")]
    BadDoorway(DoorId, String),
    #[error("object {0} is invalid: {1}")]
    BadObject(ObjectId, String),
    #[error("room {0} has type {1} outside the vocabulary")]
    BadRoomType(RoomId, usize),
    #[error("grid has {got} cells, expected {expected}")]
    GridSize { got: usize, expected: usize },
}

/// Immutable world model shared by every episode in a house.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseLayout {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub grid: Vec<CellKind>,
    pub rooms: Vec<Room>,
    pub doorways: Vec<Doorway>,
    pub objects: Vec<Object>,
    pub vocab: VocabSizes,
    room_of: Vec<Option<RoomId>>,
    door_of: Vec<Option<DoorId>>,
}

impl HouseLayout {
    /// Assembles a layout and builds the per-cell lookup tables.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        id: u64,
        width: usize,
        height: usize,
        grid: Vec<CellKind>,
        rooms: Vec<Room>,
        doorways: Vec<Doorway>,
        objects: Vec<Object>,
        vocab: VocabSizes,
    ) -> Result<Self, LayoutError> {
        if grid.len() != width * height {
            return Err(LayoutError::GridSize {
                got: grid.len(),
                expected: width * height,
            });
        }
        let mut room_of = vec![None; grid.len()];
        for room in &rooms {
            for p in room.extent.cells() {
                if p.x >= 0 && p.y >= 0 && (p.x as usize) < width && (p.y as usize) < height {
                    room_of[p.y as usize * width + p.x as usize] = Some(room.id);
                }
            }
        }
        let mut door_of = vec![None; grid.len()];
        for d in &doorways {
            if d.cell.x >= 0
                && d.cell.y >= 0
                && (d.cell.x as usize) < width
                && (d.cell.y as usize) < height
            {
                door_of[d.cell.y as usize * width + d.cell.x as usize] = Some(d.id);
            }
        }
        let house = Self {
            id,
            width,
            height,
            grid,
            rooms,
            doorways,
            objects,
            vocab,
            room_of,
            door_of,
        };
        house.validate()?;
        Ok(house)
    }

    fn index(&self, p: Pos) -> Option<usize> {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            None
        } else {
            Some(p.y as usize * self.width + p.x as usize)
        }
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        self.index(p).is_some()
    }

    /// Out-of-bounds cells read as walls.
    pub fn cell(&self, p: Pos) -> CellKind {
        self.index(p).map_or(CellKind::Wall, |i| self.grid[i])
    }

    pub fn is_traversable(&self, p: Pos) -> bool {
        matches!(self.cell(p), CellKind::Free | CellKind::Doorway)
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.cell(p) == CellKind::Wall
    }

    pub fn room_at(&self, p: Pos) -> Option<RoomId> {
        self.index(p).and_then(|i| self.room_of[i])
    }

    pub fn door_at(&self, p: Pos) -> Option<DoorId> {
        self.index(p).and_then(|i| self.door_of[i])
    }

    pub fn room_type_at(&self, p: Pos) -> Option<usize> {
        self.room_at(p).map(|r| self.rooms[r].room_type)
    }

    pub fn doors_of(&self, room: RoomId) -> impl Iterator<Item = &Doorway> + '_ {
        self.doorways
            .iter()
            .filter(move |d| d.room_a == room || d.room_b == room)
    }

    pub fn neighbors(&self, room: RoomId) -> Vec<RoomId> {
        let mut out: Vec<RoomId> = self.doors_of(room).filter_map(|d| d.other(room)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn objects_in(&self, room: RoomId) -> impl Iterator<Item = &Object> + '_ {
        self.objects.iter().filter(move |o| o.room == room)
    }

    pub fn traversable_cells(&self) -> Vec<Pos> {
        (0..self.height as i32)
            .flat_map(|y| (0..self.width as i32).map(move |x| Pos::new(x, y)))
            .filter(|&p| self.is_traversable(p))
            .collect()
    }

    /// Free cell of `room` adjacent to the doorway `door`.
    pub fn door_side(&self, door: DoorId, room: RoomId) -> Option<Pos> {
        let d = &self.doorways[door];
        d.cell
            .neighbors4()
            .into_iter()
            .find(|&n| self.room_at(n) == Some(room))
    }

    /// Rooms connected through doorways, as adjacency lists.
    pub fn room_graph(&self) -> Vec<Vec<RoomId>> {
        (0..self.rooms.len()).map(|r| self.neighbors(r)).collect()
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        for room in &self.rooms {
            if room.room_type >= self.vocab.room_types {
                return Err(LayoutError::BadRoomType(room.id, room.room_type));
            }
            for p in room.extent.cells() {
                if self.cell(p) != CellKind::Free {
                    return Err(LayoutError::RoomCellNotFree(p.x, p.y));
                }
            }
        }
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let p = Pos::new(x, y);
                if self.cell(p) == CellKind::Free {
                    let owners = self.rooms.iter().filter(|r| r.extent.contains(p)).count();
                    if owners != 1 {
                        return Err(LayoutError::FreeCellOwnership(x, y, owners));
                    }
                }
            }
        }
        for d in &self.doorways {
            if self.cell(d.cell) != CellKind::Doorway {
                return Err(LayoutError::BadDoorway(
                    d.id,
                    "cell is not a doorway".into(),
                ));
            }
            if d.room_a == d.room_b {
                return Err(LayoutError::BadDoorway(
                    d.id,
                    "joins a room to itself".into(),
                ));
            }
            let mut adjacent: Vec<RoomId> = d
                .cell
                .neighbors4()
                .iter()
                .filter_map(|&n| self.room_at(n))
                .collect();
            adjacent.sort_unstable();
            adjacent.dedup();
            let mut expected = vec![d.room_a, d.room_b];
            expected.sort_unstable();
            if adjacent != expected {
                return Err(LayoutError::BadDoorway(
                    d.id,
                    format!("touches rooms {adjacent:?}, declared {expected:?}"),
                ));
            }
        }
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let p = Pos::new(x, y);
                if self.cell(p) == CellKind::Doorway && self.door_at(p).is_none() {
                    return Err(LayoutError::BadDoorway(
                        usize::MAX,
                        format!("undeclared doorway at ({x},{y})"),
                    ));
                }
            }
        }
        for o in &self.objects {
            if self.cell(o.cell) != CellKind::Free {
                return Err(LayoutError::BadObject(o.id, "not on a free cell".into()));
            }
            if self.room_at(o.cell) != Some(o.room) {
                return Err(LayoutError::BadObject(
                    o.id,
                    "room id does not match its cell".into(),
                ));
            }
            if o.object_type >= self.vocab.object_types || o.color >= self.vocab.colors {
                return Err(LayoutError::BadObject(
                    o.id,
                    "type or color outside the vocabulary".into(),
                ));
            }
        }
        if !self.rooms.is_empty() {
            let graph = self.room_graph();
            let mut seen = vec![false; self.rooms.len()];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(r) = queue.pop_front() {
                for &n in &graph[r] {
                    if !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(LayoutError::Disconnected);
            }
        }
        Ok(())
    }
}

impl GenConfig {
    fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.rooms_min == 0 || self.rooms_min > self.rooms_max {
            return bad("room count range must be non-empty and start at 1 or more");
        }
        if self.objects_min > self.objects_max {
            return bad("object count range is empty");
        }
        if self.min_room_span == 0 || self.corridor_width == 0 {
            return bad("room span and corridor width must be positive");
        }
        if self.width < 3 || self.height < 3 {
            return bad("grid must be at least 3x3");
        }
        if self.vocab.room_types == 0 || self.vocab.object_types == 0 || self.vocab.colors == 0 {
            return bad("vocabularies must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.extra_door_prob) || !(0.0..=1.0).contains(&self.affinity) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Scratch layout in canonical orientation (corridor along x).
struct Draft {
    w: i32,
    h: i32,
    grid: Vec<CellKind>,
    rects: Vec<Rect>,
    is_hall: Vec<bool>,
    doors: Vec<(Pos, usize, usize)>,
}

impl Draft {
    fn new(w: i32, h: i32) -> Self {
        Self {
            w,
            h,
            grid: vec![CellKind::Wall; (w * h) as usize],
            rects: vec![],
            is_hall: vec![],
            doors: vec![],
        }
    }

    fn carve(&mut self, r: Rect, hall: bool) -> usize {
        for p in r.cells() {
            self.grid[(p.y * self.w + p.x) as usize] = CellKind::Free;
        }
        self.rects.push(r);
        self.is_hall.push(hall);
        self.rects.len() - 1
    }

    fn door(&mut self, p: Pos, a: usize, b: usize) {
        self.grid[(p.y * self.w + p.x) as usize] = CellKind::Doorway;
        self.doors.push((p, a, b));
    }
}

/// Splits `total` cells into `k` spans of at least `min` separated by
/// one-cell walls. Returns (start offset, length) pairs.
fn split_span<R: Rng>(rng: &mut R, total: i32, k: usize, min: i32) -> Option<Vec<(i32, i32)>> {
    if k == 0 {
        return Some(vec![]);
    }
    let walls = k as i32 - 1;
    let extra = total - walls - min * k as i32;
    if extra < 0 {
        return None;
    }
    let mut lens = vec![min; k];
    for _ in 0..extra {
        let i = rng.gen_range(0..k);
        lens[i] += 1;
    }
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for l in lens {
        out.push((at, l));
        at += l + 1;
    }
    Some(out)
}

fn draft_house<R: Rng>(
    rng: &mut R,
    cfg: &GenConfig,
    w: i32,
    h: i32,
    n: usize,
) -> Result<Draft, String> {
    let span = cfg.min_room_span as i32;
    let (iw, ih) = (w - 2, h - 2);
    let mut d = Draft::new(w, h);
    if iw < span || ih < span {
        return Err("grid interior smaller than one room".into());
    }
    match n {
        1 => {
            d.carve(
                Rect {
                    x0: 1,
                    y0: 1,
                    x1: w - 2,
                    y1: h - 2,
                },
                false,
            );
        }
        2 => {
            let parts = split_span(rng, iw, 2, span).ok_or("two rooms do not fit side by side")?;
            let a = d.carve(
                Rect {
                    x0: 1 + parts[0].0,
                    y0: 1,
                    x1: parts[0].0 + parts[0].1,
                    y1: h - 2,
                },
                false,
            );
            let b = d.carve(
                Rect {
                    x0: 1 + parts[1].0,
                    y0: 1,
                    x1: parts[1].0 + parts[1].1,
                    y1: h - 2,
                },
                false,
            );
            let wall_x = 1 + parts[0].0 + parts[0].1;
            let y = rng.gen_range(1..=h - 2);
            d.door(Pos::new(wall_x, y), a, b);
        }
        _ => {
            let c = cfg.corridor_width as i32;
            // top band rows [1, cy-2], corridor [cy, cy+c-1], bottom band [cy+c+1, h-2]
            let lo = span + 2;
            let hi = h - c - 2 - span;
            if lo > hi {
                return Err("corridor and two room bands do not fit".into());
            }
            let cy = rng.gen_range(lo..=hi);
            let cap = ((iw + 1) / (span + 1)) as usize;
            let m = n - 1;
            let k_lo = m.saturating_sub(cap);
            let k_hi = m.min(cap);
            if k_lo > k_hi {
                return Err(format!("{m} side rooms exceed band capacity {cap}"));
            }
            let k_top = rng.gen_range(k_lo..=k_hi);
            let hall = d.carve(
                Rect {
                    x0: 1,
                    y0: cy,
                    x1: w - 2,
                    y1: cy + c - 1,
                },
                true,
            );
            let bands = [
                (k_top, 1, cy - 2, cy - 1),
                (m - k_top, cy + c + 1, h - 2, cy + c),
            ];
            for (k, y0, y1, door_row) in bands {
                let parts = split_span(rng, iw, k, span).ok_or("rooms do not fit in band")?;
                let mut prev: Option<(usize, i32)> = None;
                for (off, len) in parts {
                    let rect = Rect {
                        x0: 1 + off,
                        y0,
                        x1: off + len,
                        y1,
                    };
                    let id = d.carve(rect, false);
                    let dx = rng.gen_range(rect.x0..=rect.x1);
                    d.door(Pos::new(dx, door_row), id, hall);
                    if let Some((pid, wall_x)) = prev {
                        if rng.gen_bool(cfg.extra_door_prob) {
                            let dy = rng.gen_range(y0..=y1);
                            d.door(Pos::new(wall_x, dy), pid, id);
                        }
                    }
                    prev = Some((id, rect.x1 + 1));
                }
            }
        }
    }
    Ok(d)
}

/// Generates a house. Identical `(seed, config)` pairs give identical houses.
pub fn generate_house(seed: u64, cfg: &GenConfig) -> Result<HouseLayout, GenError> {
    cfg.check()?;
    let vocab = Vocab::new(cfg.vocab);
    let mut rng = rng_for(seed, &[0x686f_7573]);
    let mut last_reason = String::new();
    for _ in 0..cfg.max_retries.max(1) {
        let n = rng.gen_range(cfg.rooms_min..=cfg.rooms_max);
        let transpose = rng.gen_bool(0.5);
        let (cw, ch) = if transpose {
            (cfg.height, cfg.width)
        } else {
            (cfg.width, cfg.height)
        };
        let draft = match draft_house(&mut rng, cfg, cw as i32, ch as i32, n) {
            Ok(d) => d,
            Err(reason) => {
                last_reason = reason;
                continue;
            }
        };
        let house = finish(&mut rng, cfg, &vocab, seed, draft, transpose).map_err(|e| {
            GenError::Construction {
                attempts: 1,
                reason: e.to_string(),
            }
        })?;
        return Ok(house);
    }
    Err(GenError::Construction {
        attempts: cfg.max_retries.max(1),
        reason: last_reason,
    })
}

fn finish<R: Rng>(
    rng: &mut R,
    cfg: &GenConfig,
    vocab: &Vocab,
    seed: u64,
    draft: Draft,
    transpose: bool,
) -> Result<HouseLayout, LayoutError> {
    let tp = |p: Pos| if transpose { Pos::new(p.y, p.x) } else { p };
    let (width, height) = (cfg.width, cfg.height);
    let mut grid = vec![CellKind::Wall; width * height];
    for y in 0..draft.h {
        for x in 0..draft.w {
            let q = tp(Pos::new(x, y));
            grid[q.y as usize * width + q.x as usize] = draft.grid[(y * draft.w + x) as usize];
        }
    }
    // room types: the corridor is the hall, other rooms draw distinct
    // non-hall types while they last
    let mut pool: Vec<usize> = (0..vocab.sizes.room_types)
        .filter(|&t| t != Vocab::HALL)
        .collect();
    if pool.is_empty() {
        pool.push(Vocab::HALL);
    }
    pool.shuffle(rng);
    let mut next_type = 0usize;
    let mut rooms = Vec::with_capacity(draft.rects.len());
    for (id, (r, &hall)) in draft.rects.iter().zip(&draft.is_hall).enumerate() {
        let room_type = if hall {
            Vocab::HALL
        } else if next_type < pool.len() {
            next_type += 1;
            pool[next_type - 1]
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        let (a, b) = (tp(Pos::new(r.x0, r.y0)), tp(Pos::new(r.x1, r.y1)));
        let extent = Rect {
            x0: a.x.min(b.x),
            y0: a.y.min(b.y),
            x1: a.x.max(b.x),
            y1: a.y.max(b.y),
        };
        rooms.push(Room {
            id,
            room_type,
            extent,
        });
    }
    let doorways = draft
        .doors
        .iter()
        .enumerate()
        .map(|(id, &(p, a, b))| Doorway {
            id,
            cell: tp(p),
            room_a: a,
            room_b: b,
        })
        .collect();
    let mut objects = Vec::new();
    for (room, &hall) in rooms.iter().zip(&draft.is_hall) {
        if hall {
            continue;
        }
        let mut cells: Vec<Pos> = room.extent.cells().collect();
        let count = rng
            .gen_range(cfg.objects_min..=cfg.objects_max)
            .min(cells.len());
        cells.shuffle(rng);
        let home: Vec<usize> = (0..vocab.sizes.object_types)
            .filter(|&o| vocab.home_room(o) == room.room_type)
            .collect();
        for &cell in cells.iter().take(count) {
            let object_type = if !home.is_empty() && rng.gen_bool(cfg.affinity) {
                home[rng.gen_range(0..home.len())]
            } else {
                rng.gen_range(0..vocab.sizes.object_types)
            };
            let color = rng.gen_range(0..vocab.sizes.colors);
            objects.push(Object {
                id: objects.len(),
                object_type,
                color,
                cell,
                room: room.id,
            });
        }
    }
    HouseLayout::from_parts(
        seed, width, height, grid, rooms, doorways, objects, cfg.vocab,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let cfg = GenConfig::default();
        let a = generate_house(7, &cfg).unwrap();
        let b = generate_house(7, &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_house(8, &cfg).unwrap();
        assert_ne!(a.grid, c.grid);
    }

    #[test]
    fn single_room_house() {
        let cfg = GenConfig {
            rooms_min: 1,
            rooms_max: 1,
            ..GenConfig::default()
        };
        let h = generate_house(3, &cfg).unwrap();
        assert_eq!(h.rooms.len(), 1);
        assert!(h.doorways.is_empty());
        assert_eq!(h.room_graph(), vec![Vec::<RoomId>::new()]);
    }

    #[test]
    fn two_room_house_has_one_door() {
        let cfg = GenConfig {
            rooms_min: 2,
            rooms_max: 2,
            ..GenConfig::default()
        };
        let h = generate_house(5, &cfg).unwrap();
        assert_eq!(h.rooms.len(), 2);
        assert_eq!(h.doorways.len(), 1);
    }

    #[test]
    fn rooms_that_cannot_fit_fail() {
        let cfg = GenConfig {
            width: 9,
            height: 9,
            rooms_min: 9,
            rooms_max: 9,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_house(1, &cfg),
            Err(GenError::Construction { .. })
        ));
        let bad = GenConfig {
            rooms_min: 4,
            rooms_max: 2,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_house(1, &bad),
            Err(GenError::InvalidConfig(_))
        ));
    }

    #[test]
    fn many_seeds_validate() {
        let cfg = GenConfig::default();
        for seed in 0..200 {
            let h = generate_house(seed, &cfg).unwrap();
            h.validate().unwrap();
            assert!(h.rooms.len() >= cfg.rooms_min && h.rooms.len() <= cfg.rooms_max);
        }
    }
}
