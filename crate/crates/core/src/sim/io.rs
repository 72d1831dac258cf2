//! Versioned JSON text format for houses and their questions.
//!
//! The grid is run-length encoded as `<count><kind>` runs in row-major order
//! with `#` wall, `.` free and `D` doorway, e.g. `21#3.1D`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layout::{CellKind, Doorway, HouseLayout, LayoutError, Object, Room};
use super::question::Question;
use super::vocab::VocabSizes;

pub const HOUSE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HouseIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed house file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported house format version {got} (expected {HOUSE_FORMAT_VERSION})")]
    Version { got: u32 },
    #[error("bad grid encoding: {0}")]
    Grid(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseFile {
    pub format_version: u32,
    pub house_id: u64,
    pub width: usize,
    pub height: usize,
    pub vocab: VocabSizes,
    pub grid: String,
    pub rooms: Vec<Room>,
    pub doorways: Vec<Doorway>,
    pub objects: Vec<Object>,
    pub questions: Vec<Question>,
}

fn kind_char(k: CellKind) -> char {
    match k {
        CellKind::Wall => '#',
        CellKind::Free => '.',
        CellKind::Doorway => 'D',
    }
}

pub fn encode_grid(grid: &[CellKind]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < grid.len() {
        let k = grid[i];
        let run = grid[i..].iter().take_while(|&&c| c == k).count();
        out.push_str(&run.to_string());
        out.push(kind_char(k));
        i += run;
    }
    out
}

pub fn decode_grid(s: &str, expected: usize) -> Result<Vec<CellKind>, HouseIoError> {
    let mut grid = Vec::with_capacity(expected);
    let mut count = String::new();
    for ch in s.chars() {
        if ch.is_ascii_digit() {
            count.push(ch);
            continue;
        }
        let kind = match ch {
            '#' => CellKind::Wall,
            '.' => CellKind::Free,
            'D' => CellKind::Doorway,
            other => return Err(HouseIoError::Grid(format!("unknown cell kind {other:?}"))),
        };
        let n: usize = count
            .parse()
            .map_err(|_| HouseIoError::Grid("run without a count".into()))?;
        count.clear();
        grid.extend(std::iter::repeat_n(kind, n));
    }
    if !count.is_empty() {
        return Err(HouseIoError::Grid("trailing count without a kind".into()));
    }
    if grid.len() != expected {
        return Err(HouseIoError::Grid(format!(
            "decoded {} cells, expected {expected}",
            grid.len()
        )));
    }
    Ok(grid)
}

impl HouseFile {
    pub fn new(house: &HouseLayout, questions: Vec<Question>) -> Self {
        Self {
            format_version: HOUSE_FORMAT_VERSION,
            house_id: house.id,
            width: house.width,
            height: house.height,
            vocab: house.vocab,
            grid: encode_grid(&house.grid),
            rooms: house.rooms.clone(),
            doorways: house.doorways.clone(),
            objects: house.objects.clone(),
            questions,
        }
    }

    pub fn to_layout(&self) -> Result<HouseLayout, HouseIoError> {
        if self.format_version != HOUSE_FORMAT_VERSION {
            return Err(HouseIoError::Version {
                got: self.format_version,
            });
        }
        let grid = decode_grid(&self.grid, self.width * self.height)?;
        Ok(HouseLayout::from_parts(
            self.house_id,
            self.width,
            self.height,
            grid,
            self.rooms.clone(),
            self.doorways.clone(),
            self.objects.clone(),
            self.vocab,
        )?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("house file serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, HouseIoError> {
        let file: HouseFile = serde_json::from_str(s)?;
        if file.format_version != HOUSE_FORMAT_VERSION {
            return Err(HouseIoError::Version {
                got: file.format_version,
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), HouseIoError> {
        fs::write(path, self.to_json()).map_err(|source| HouseIoError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HouseIoError> {
        let s = fs::read_to_string(path).map_err(|source| HouseIoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

/// File name used for a house inside a dataset directory.
pub fn house_file_name(id: u64) -> String {
    format!("house_{id:06}.json")
}

/// Loads every `house_*.json` in a directory, sorted by house id.
pub fn load_house_dir(dir: &Path) -> Result<Vec<(HouseLayout, Vec<Question>)>, HouseIoError> {
    let io = |source| HouseIoError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("house_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let file = HouseFile::load(&p)?;
        let house = file.to_layout()?;
        out.push((house, file.questions));
    }
    out.sort_by_key(|(h, _)| h.id);
    Ok(out)
}
