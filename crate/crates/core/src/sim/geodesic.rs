//! Navigable (4-connected, wall-respecting) distances.

use std::collections::VecDeque;

use thiserror::Error;

use super::layout::HouseLayout;
use super::motion::Pos;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistanceError {
    #[error("cell ({0},{1}) is not traversable")]
    NotTraversable(i32, i32),
    #[error("no traversable path from ({0},{1}) to ({2},{3})")]
    Unreachable(i32, i32, i32, i32),
    #[error("distance field needs at least one source")]
    NoSource,
}

/// Breadth-first distances from one source cell to every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    pub source: Pos,
    dist: Vec<u32>,
}

impl DistanceField {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn new(house: &HouseLayout, source: Pos) -> Result<Self, DistanceError> {
        Self::from_sources(house, &[source])
    }

    /// Distance to the nearest of several sources; `source` is the first.
    pub fn from_sources(house: &HouseLayout, sources: &[Pos]) -> Result<Self, DistanceError> {
        let (w, h) = (house.width, house.height);
        let mut dist = vec![Self::UNREACHABLE; w * h];
        let mut queue = VecDeque::new();
        for &s in sources {
            if !house.is_traversable(s) {
                return Err(DistanceError::NotTraversable(s.x, s.y));
            }
            let i = s.y as usize * w + s.x as usize;
            if dist[i] != 0 {
                dist[i] = 0;
                queue.push_back(s);
            }
        }
        let source = *sources.first().ok_or(DistanceError::NoSource)?;
        while let Some(p) = queue.pop_front() {
            let d = dist[p.y as usize * w + p.x as usize];
            for n in p.neighbors4() {
                if house.is_traversable(n) {
                    let i = n.y as usize * w + n.x as usize;
                    if dist[i] == Self::UNREACHABLE {
                        dist[i] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            source,
            dist,
        })
    }

    /// Raw distance, `UNREACHABLE` for walls, out-of-bounds and cut-off cells.
    pub fn raw(&self, p: Pos) -> u32 {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            return Self::UNREACHABLE;
        }
        self.dist[p.y as usize * self.width + p.x as usize]
    }

    pub fn get(&self, p: Pos) -> Result<u32, DistanceError> {
        match self.raw(p) {
            Self::UNREACHABLE => Err(DistanceError::Unreachable(
                self.source.x,
                self.source.y,
                p.x,
                p.y,
            )),
            d => Ok(d),
        }
    }
}

/// Shortest traversable path length between two cells, in cells.
pub fn geodesic_distance(house: &HouseLayout, from: Pos, to: Pos) -> Result<u32, DistanceError> {
    if !house.is_traversable(to) {
        return Err(DistanceError::NotTraversable(to.x, to.y));
    }
    DistanceField::new(house, from)?.get(to)
}
