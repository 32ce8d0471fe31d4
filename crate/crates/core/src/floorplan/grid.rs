// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FloorplanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
}

/// Binary occupancy grid.
///
/// Cell `(i, j)` covers `[x0 + i·res, x0 + (i+1)·res) × [y0 + j·res, y0 + (j+1)·res)`.
/// Cells are stored row-major with row 0 at the lowest y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        cells: Vec<Cell>,
    ) -> Result<Self, FloorplanError> {
        if width == 0 || height == 0 {
            return Err(FloorplanError::ZeroArea);
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(FloorplanError::InvalidResolution(resolution));
        }
        if cells.len() != width * height {
            return Err(FloorplanError::InconsistentDims(format!(
                "{width}x{height} grid but {} cells",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// A grid with every cell set to `fill`.
    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        fill: Cell,
    ) -> Result<Self, FloorplanError> {
        Self::new(width, height, resolution, origin, vec![fill; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// World extent `(width_m, height_m)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[self.index(i, j)]
    }

    #[inline]
    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.width + i] == Cell::Occupied
    }

    pub fn set(&mut self, i: usize, j: usize, cell: Cell) {
        let idx = self.index(i, j);
        self.cells[idx] = cell;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.resolution,
            self.origin.1 + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing the world point, or `None` outside the covered rectangle.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let gx = ((x - self.origin.0) / self.resolution).floor();
        let gy = ((y - self.origin.1) / self.resolution).floor();
        if gx >= 0.0 && gy >= 0.0 && (gx as usize) < self.width && (gy as usize) < self.height {
            Some((gx as usize, gy as usize))
        } else {
            None
        }
    }

    pub fn is_free_at(&self, x: f64, y: f64) -> bool {
        self.world_to_cell(x, y)
            .is_some_and(|(i, j)| !self.is_occupied(i, j))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Free).count()
    }

    /// `true` exactly where the cell is free, row-major like the cells.
    pub fn free_space_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c == Cell::Free).collect()
    }

    /// Same cells with the origin moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            origin: (self.origin.0 + dx, self.origin.1 + dy),
            ..self.clone()
        }
    }

    /// Resamples onto a grid of different resolution covering the same rectangle.
    /// A target cell is occupied if it overlaps any occupied source cell.
    pub fn resampled(&self, resolution: f64) -> Result<Self, FloorplanError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(FloorplanError::InvalidResolution(resolution));
        }
        let (ew, eh) = self.extent();
        let width = ((ew / resolution) - 1e-9).ceil().max(1.0) as usize;
        let height = ((eh / resolution) - 1e-9).ceil().max(1.0) as usize;
        let mut cells = vec![Cell::Free; width * height];
        let scale = resolution / self.resolution;
        for (j, row) in cells.chunks_mut(width).enumerate() {
            let sj0 = (j as f64 * scale + 1e-9).floor() as usize;
            let sj1 = (((j + 1) as f64 * scale - 1e-9).ceil() as usize).min(self.height);
            for (i, cell) in row.iter_mut().enumerate() {
                let si0 = (i as f64 * scale + 1e-9).floor() as usize;
                let si1 = (((i + 1) as f64 * scale - 1e-9).ceil() as usize).min(self.width);
                let occupied = (sj0..sj1).any(|sj| (si0..si1).any(|si| self.is_occupied(si, sj)));
                if occupied {
                    *cell = Cell::Occupied;
                }
            }
        }
        Self::new(width, height, resolution, self.origin, cells)
    }
}
