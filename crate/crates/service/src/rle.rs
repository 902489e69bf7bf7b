//! Run-length coding of the tri-state occupancy grid for the wire.

use orion_core::geometry::Point2;
use orion_core::localization::{CellState, OccupancyGrid};
use serde::{Deserialize, Serialize};

/// Row-major runs of `[state, count]`, states numbered as in [`CellState`]
/// (0 unexplored, 1 occupied, 2 explored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRle {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point2,
    pub runs: Vec<[u32; 2]>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RleError {
    #[error("unknown cell state {0}")]
    BadState(u32),
    #[error("runs cover {got} cells, grid has {want}")]
    Length { got: usize, want: usize },
    #[error("zero-length run")]
    EmptyRun,
}

pub fn encode(grid: &OccupancyGrid) -> GridRle {
    let mut runs: Vec<[u32; 2]> = Vec::new();
    for &c in &grid.cells {
        let s = c as u32;
        match runs.last_mut() {
            Some(last) if last[0] == s => last[1] += 1,
            _ => runs.push([s, 1]),
        }
    }
    GridRle {
        width: grid.width,
        height: grid.height,
        resolution: grid.resolution,
        origin: grid.origin,
        runs,
    }
}

pub fn decode(rle: &GridRle) -> Result<OccupancyGrid, RleError> {
    let want = rle.width * rle.height;
    let mut cells = Vec::with_capacity(want);
    for &[s, n] in &rle.runs {
        let state = match s {
            0 => CellState::Unexplored,
            1 => CellState::Occupied,
            2 => CellState::Explored,
            other => return Err(RleError::BadState(other)),
        };
        if n == 0 {
            return Err(RleError::EmptyRun);
        }
        if cells.len() + n as usize > want {
            return Err(RleError::Length {
                got: cells.len() + n as usize,
                want,
            });
        }
        cells.extend(std::iter::repeat_n(state, n as usize));
    }
    if cells.len() != want {
        return Err(RleError::Length {
            got: cells.len(),
            want,
        });
    }
    let mut grid = OccupancyGrid::new(rle.width, rle.height, rle.resolution, rle.origin);
    grid.cells = cells;
    Ok(grid)
}
