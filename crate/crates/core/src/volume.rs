// SPDX-License-Identifier: Apache-2.0

//! Shape and indexing shared by likelihood and belief volumes.
//!
//! Volumes are stored orientation-major: entry `(k, j, i)` lives at
//! `(k·height + j)·width + i`, so each orientation bin is one contiguous `(x, y)` plane.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::floorplan::OccupancyGrid;
use crate::pose::{normalize_angle, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeShape {
    pub width: usize,
    pub height: usize,
    pub n_theta: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
}

impl VolumeShape {
    pub fn for_grid(grid: &OccupancyGrid, n_theta: usize) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            n_theta,
            resolution: grid.resolution(),
            origin: grid.origin(),
        }
    }

    /// Cells per orientation plane.
    #[inline]
    pub fn plane(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.plane() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, k: usize, j: usize, i: usize) -> usize {
        (k * self.height + j) * self.width + i
    }

    /// `(k, j, i)` for a flat index.
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let plane = self.plane();
        let k = idx / plane;
        let rem = idx % plane;
        (k, rem / self.width, rem % self.width)
    }

    /// Width of one orientation bin in radians.
    pub fn bin_width(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    /// Bin center `-π + 2πk/n`.
    pub fn bin_center(&self, k: usize) -> f64 {
        bin_center(k, self.n_theta)
    }

    /// Nearest orientation bin for a heading.
    pub fn bin_of(&self, phi: f64) -> usize {
        let b = ((normalize_angle(phi) + PI) / self.bin_width()).round() as usize;
        b % self.n_theta
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.resolution,
            self.origin.1 + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Pose at the center of the cell and orientation bin of a flat index.
    pub fn pose_at(&self, idx: usize) -> Pose2 {
        let (k, j, i) = self.unravel(idx);
        let (x, y) = self.cell_center(i, j);
        Pose2::new(x, y, self.bin_center(k))
    }

    pub fn full_box(&self) -> CellBox {
        CellBox::full(self.width, self.height)
    }

    /// Flat index of the cell containing a pose and its nearest orientation bin.
    pub fn index_of(&self, pose: &Pose2) -> Option<usize> {
        let fi = ((pose.x - self.origin.0) / self.resolution).floor();
        let fj = ((pose.y - self.origin.1) / self.resolution).floor();
        if !(fi >= 0.0 && fj >= 0.0 && fi < self.width as f64 && fj < self.height as f64) {
            return None;
        }
        Some(self.index(self.bin_of(pose.phi), fj as usize, fi as usize))
    }
}

/// Half-open cell rectangle `[i0, i1) × [j0, j1)` shared by every orientation plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CellBox {
    pub const EMPTY: CellBox = CellBox {
        i0: 0,
        i1: 0,
        j0: 0,
        j1: 0,
    };

    /// Every cell of a `width × height` grid.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            i0: 0,
            i1: width,
            j0: 0,
            j1: height,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.i0 >= self.i1 || self.j0 >= self.j1
    }

    pub fn width(&self) -> usize {
        self.i1.saturating_sub(self.i0)
    }

    pub fn height(&self) -> usize {
        self.j1.saturating_sub(self.j0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn union(self, other: CellBox) -> CellBox {
        if self.is_empty() {
            return other;
        }
        if other.is_empty() {
            return self;
        }
        CellBox {
            i0: self.i0.min(other.i0),
            i1: self.i1.max(other.i1),
            j0: self.j0.min(other.j0),
            j1: self.j1.max(other.j1),
        }
    }

    /// Grows the box to include cell `(i, j)`.
    pub fn include(&mut self, i: usize, j: usize) {
        if self.is_empty() {
            *self = CellBox {
                i0: i,
                i1: i + 1,
                j0: j,
                j1: j + 1,
            };
        } else {
            self.i0 = self.i0.min(i);
            self.i1 = self.i1.max(i + 1);
            self.j0 = self.j0.min(j);
            self.j1 = self.j1.max(j + 1);
        }
    }
}

/// Bin center `-π + 2πk/n`. Computed as `2π·(k/n) − π` so that dyadic fractions
/// (for example the bin at heading 0 when `n` is even) are exact.
pub fn bin_center(k: usize, n_theta: usize) -> f64 {
    normalize_angle(TAU * (k as f64 / n_theta as f64) - PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_centers() {
        assert_eq!(bin_center(0, 36), -PI);
        assert_eq!(bin_center(18, 36), 0.0);
        assert_eq!(bin_center(2, 4), 0.0);
        let s = VolumeShape {
            width: 3,
            height: 2,
            n_theta: 36,
            resolution: 0.1,
            origin: (0.0, 0.0),
        };
        for k in 0..36 {
            assert_eq!(s.bin_of(s.bin_center(k)), k);
        }
        assert_eq!(s.bin_of(PI - 1e-9), 0);
    }

    #[test]
    fn index_roundtrip() {
        let s = VolumeShape {
            width: 5,
            height: 4,
            n_theta: 3,
            resolution: 0.5,
            origin: (1.0, -1.0),
        };
        for idx in 0..s.len() {
            let (k, j, i) = s.unravel(idx);
            assert_eq!(s.index(k, j, i), idx);
        }
        let p = s.pose_at(s.index(2, 1, 3));
        assert_eq!((p.x, p.y), (1.0 + 3.5 * 0.5, -1.0 + 1.5 * 0.5));
    }
}
