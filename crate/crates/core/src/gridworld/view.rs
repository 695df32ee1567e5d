use serde::{Deserialize, Serialize};

use super::{Cell, GridState, Object};

pub const VIEW_SIZE: usize = 7;
/// Agent column in the egocentric view.
pub const AGENT_VX: usize = VIEW_SIZE / 2;
/// Agent row in the egocentric view (bottom row, facing up).
pub const AGENT_VY: usize = VIEW_SIZE - 1;

/// Egocentric partial view. `view[vy][vx]` is `None` for cells the agent
/// cannot see; the agent sits at `(AGENT_VX, AGENT_VY)` facing row 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub view: [[Option<Cell>; VIEW_SIZE]; VIEW_SIZE],
    pub carried: Option<Object>,
    pub mission: String,
}

impl Observation {
    /// A view where nothing but the agent's own (empty) cell is visible.
    pub fn blank(mission: impl Into<String>) -> Self {
        let mut view = [[None; VIEW_SIZE]; VIEW_SIZE];
        view[AGENT_VY][AGENT_VX] = Some(Cell::Empty);
        Self {
            view,
            carried: None,
            mission: mission.into(),
        }
    }

    /// Marks `(vx, vy)` visible with the given content.
    pub fn set(&mut self, vx: usize, vy: usize, cell: Cell) {
        self.view[vy][vx] = Some(cell);
    }

    pub fn get(&self, vx: usize, vy: usize) -> Option<Cell> {
        self.view[vy][vx]
    }

    pub fn is_visible(&self, vx: usize, vy: usize) -> bool {
        self.view[vy][vx].is_some()
    }
}

/// World coordinates of view cell `(vx, vy)`.
pub(crate) fn view_to_world(state: &GridState, vx: usize, vy: usize) -> (i32, i32) {
    let (fx, fy) = state.agent_dir.delta();
    let (rx, ry) = state.agent_dir.turn_right().delta();
    let fwd = (AGENT_VY - vy) as i32;
    let lat = vx as i32 - AGENT_VX as i32;
    (
        state.agent_pos.0 + fwd * fx + lat * rx,
        state.agent_pos.1 + fwd * fy + lat * ry,
    )
}

pub(crate) fn observe(state: &GridState) -> Observation {
    let mut grid = [[Cell::Empty; VIEW_SIZE]; VIEW_SIZE];
    for (vy, row) in grid.iter_mut().enumerate() {
        for (vx, cell) in row.iter_mut().enumerate() {
            let (x, y) = view_to_world(state, vx, vy);
            *cell = state.get(x, y);
        }
    }
    grid[AGENT_VY][AGENT_VX] = state.carried.map(Cell::from_object).unwrap_or(Cell::Empty);

    let mask = visibility(&grid);
    let mut view = [[None; VIEW_SIZE]; VIEW_SIZE];
    for vy in 0..VIEW_SIZE {
        for vx in 0..VIEW_SIZE {
            if mask[vy][vx] {
                view[vy][vx] = Some(grid[vy][vx]);
            }
        }
    }
    view[AGENT_VY][AGENT_VX] = Some(Cell::Empty);
    Observation {
        view,
        carried: state.carried,
        mission: state.mission.clone(),
    }
}

/// Flood-fill visibility from the agent cell, row by row from near to far,
/// sweeping right then left. Opaque cells are themselves visible but stop
/// propagation.
pub(crate) fn visibility(grid: &[[Cell; VIEW_SIZE]; VIEW_SIZE]) -> [[bool; VIEW_SIZE]; VIEW_SIZE] {
    let n = VIEW_SIZE;
    let mut mask = [[false; VIEW_SIZE]; VIEW_SIZE];
    mask[AGENT_VY][AGENT_VX] = true;
    for j in (0..n).rev() {
        for i in 0..n - 1 {
            if !mask[j][i] || !grid[j][i].see_behind() {
                continue;
            }
            mask[j][i + 1] = true;
            if j > 0 {
                mask[j - 1][i + 1] = true;
                mask[j - 1][i] = true;
            }
        }
        for i in (1..n).rev() {
            if !mask[j][i] || !grid[j][i].see_behind() {
                continue;
            }
            mask[j][i - 1] = true;
            if j > 0 {
                mask[j - 1][i - 1] = true;
                mask[j - 1][i] = true;
            }
        }
    }
    mask
}
