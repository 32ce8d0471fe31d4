// SPDX-License-Identifier: Apache-2.0

//! Exact grid traversal (Amanatides–Woo) for ray lengths and floorplan depths.

use super::{FloorplanError, OccupancyGrid};
use crate::pose::{normalize_angle, Pose2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayHit {
    /// Distance in meters to the first crossing into an occupied cell.
    Hit(f64),
    /// The ray left the grid or `max_range` first.
    NoHit,
}

impl RayHit {
    pub fn range(self) -> Option<f64> {
        match self {
            RayHit::Hit(r) => Some(r),
            RayHit::NoHit => None,
        }
    }
}

/// Starting cell along one axis. A coordinate exactly on a grid line belongs to the
/// cell the ray moves into.
#[inline]
fn start_cell(g: f64, dir: f64) -> i64 {
    let f = g.floor();
    if f == g && dir < 0.0 {
        f as i64 - 1
    } else {
        f as i64
    }
}

/// Casts a ray from `(x, y)` at absolute world angle `angle`.
pub fn cast_ray(
    grid: &OccupancyGrid,
    x: f64,
    y: f64,
    angle: f64,
    max_range: f64,
) -> Result<RayHit, FloorplanError> {
    let res = grid.resolution();
    let (ox, oy) = grid.origin();
    let gx = (x - ox) / res;
    let gy = (y - oy) / res;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let (dy, dx) = angle.sin_cos();

    if !(gx.is_finite() && gy.is_finite()) {
        return Err(FloorplanError::OriginOutside { x, y });
    }
    let mut ix = start_cell(gx, dx);
    let mut iy = start_cell(gy, dy);
    if ix < 0 || iy < 0 || ix >= w || iy >= h {
        return Err(FloorplanError::OriginOutside { x, y });
    }
    if grid.is_occupied(ix as usize, iy as usize) {
        return Err(FloorplanError::OriginOccupied { x, y });
    }

    let max_t = max_range / res;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (ix as f64 + 1.0 - gx) / dx
    } else if dx < 0.0 {
        (ix as f64 - gx) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (iy as f64 + 1.0 - gy) / dy
    } else if dy < 0.0 {
        (iy as f64 - gy) / dy
    } else {
        f64::INFINITY
    };

    let occupied = |i: i64, j: i64| i >= 0 && j >= 0 && i < w && j < h && grid.is_occupied(i as usize, j as usize);

    loop {
        let t;
        if t_max_x < t_max_y {
            t = t_max_x;
            ix += step_x;
            t_max_x += delta_x;
        } else if t_max_y < t_max_x {
            t = t_max_y;
            iy += step_y;
            t_max_y += delta_y;
        } else {
            // Exact corner crossing: touching either side cell counts as a hit.
            t = t_max_x;
            if t > max_t {
                return Ok(RayHit::NoHit);
            }
            if occupied(ix + step_x, iy) || occupied(ix, iy + step_y) {
                return Ok(RayHit::Hit(t * res));
            }
            ix += step_x;
            iy += step_y;
            t_max_x += delta_x;
            t_max_y += delta_y;
        }
        if t > max_t || !t.is_finite() {
            return Ok(RayHit::NoHit);
        }
        if ix < 0 || iy < 0 || ix >= w || iy >= h {
            return Ok(RayHit::NoHit);
        }
        if grid.is_occupied(ix as usize, iy as usize) {
            return Ok(RayHit::Hit(t * res));
        }
    }
}

/// Floorplan depth for each ray offset: the ray length at world angle `phi + α`
/// projected onto the optical axis (`r·cos α`). `None` marks rays without a hit.
pub fn floorplan_depth(
    grid: &OccupancyGrid,
    pose: &Pose2,
    ray_angles: &[f64],
    max_range: f64,
) -> Result<Vec<Option<f64>>, FloorplanError> {
    ray_angles
        .iter()
        .map(|&alpha| {
            let hit = cast_ray(grid, pose.x, pose.y, normalize_angle(pose.phi + alpha), max_range)?;
            Ok(hit.range().map(|r| r * alpha.cos()))
        })
        .collect()
}
