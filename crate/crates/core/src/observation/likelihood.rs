// SPDX-License-Identifier: Apache-2.0

//! Laplace observation likelihood over the full pose grid.
//!
//! For a pose `s` at a free cell center and orientation bin center,
//!
//! ```text
//! log p(o | s) = Σ_j valid  [ −log(2·b_j) − |d̃_j − d_j(s)| / b_j ]
//! ```
//!
//! with `d_j(s) = r_j(s)·cos α_j`. Rays whose floorplan cast misses contribute
//! `−log(2·b_j) − max_range / b_j`. Occupied cells are `−∞`.
//!
//! Ray lengths depend only on the map, the cell and the absolute ray direction, so a
//! [`RangeTable`] casts every distinct direction once per free cell and is reused
//! across frames sharing the same ray layout.

use rayon::prelude::*;

use super::{DepthObservation, ObservationError, B_MIN};
use crate::floorplan::{cast_ray, OccupancyGrid};
use crate::pgm;
use crate::pose::normalize_angle;
use crate::volume::{CellBox, VolumeShape};

/// Absolute ray directions closer than this share one table column.
const DIRECTION_MERGE_TOL: f64 = 1e-9;

const CELLS_PER_TASK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UncertaintyMode {
    /// Use each ray's own scale.
    PerRay,
    /// Replace every scale by one constant.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct LikelihoodVolume {
    pub shape: VolumeShape,
    /// Orientation-major log-likelihoods, see [`crate::volume`].
    pub log_values: Vec<f64>,
    /// Set when the observation had no valid ray; free cells then hold 0.
    pub no_valid_rays: bool,
}

impl LikelihoodVolume {
    /// Flat index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (idx, &v) in self.log_values.iter().enumerate() {
            if v > self.log_values[best] {
                best = idx;
            }
        }
        best
    }

    /// Per-cell maximum over orientations, row-major.
    pub fn max_marginal(&self) -> Vec<f64> {
        let plane = self.shape.plane();
        let mut out = vec![f64::NEG_INFINITY; plane];
        for slice in self.log_values.chunks(plane) {
            for (o, &v) in out.iter_mut().zip(slice) {
                *o = o.max(v);
            }
        }
        out
    }

    /// Max-marginal scaled to `[0, 1]` relative to the global peak, as P2.
    pub fn heatmap_pgm(&self) -> String {
        let marg = self.max_marginal();
        let peak = marg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values: Vec<f64> = marg.iter().map(|&v| (v - peak).exp()).collect();
        pgm::heatmap_p2(self.shape.width, self.shape.height, &values)
    }
}

/// Ray lengths from every free cell center along every absolute direction used by a
/// ray layout (`n_theta` bin centers × the ray offsets).
#[derive(Debug, Clone)]
pub struct RangeTable {
    shape: VolumeShape,
    max_range: f64,
    ray_angles: Vec<f64>,
    ray_cos: Vec<f64>,
    /// Row-major cell indices of free cells.
    free_cells: Vec<u32>,
    /// Table row of each grid cell, `u32::MAX` for occupied cells.
    row_of: Vec<u32>,
    n_dirs: usize,
    stride: usize,
    /// `free_cells.len() × stride`; `∞` marks a miss.
    ranges: Vec<f64>,
    /// Direction column for `(k, j)`, `k·R + j`.
    dir_ids: Vec<u32>,
    /// Start of bin `k`'s contiguous window in a padded row, when every bin has one.
    windows: Option<Vec<usize>>,
}

impl RangeTable {
    pub fn build(
        grid: &OccupancyGrid,
        ray_angles: &[f64],
        n_theta: usize,
        max_range: f64,
    ) -> Result<Self, ObservationError> {
        if n_theta == 0 {
            return Err(ObservationError::Invalid("n_theta must be at least 1".into()));
        }
        if !(max_range > 0.0) {
            return Err(ObservationError::Invalid(format!("max_range must be positive, got {max_range}")));
        }
        let shape = VolumeShape::for_grid(grid, n_theta);
        let free_cells: Vec<u32> = grid
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == crate::floorplan::Cell::Free)
            .map(|(i, _)| i as u32)
            .collect();
        if free_cells.is_empty() {
            return Err(ObservationError::EmptyFreeSpace);
        }

        let n_rays = ray_angles.len();
        let (dir_angles, dir_ids) = distinct_directions(&shape, ray_angles);
        let n_dirs = dir_angles.len();

        let contiguous = n_rays > 0
            && (0..n_theta).all(|k| {
                let first = dir_ids[k * n_rays] as usize;
                (0..n_rays).all(|j| dir_ids[k * n_rays + j] as usize == (first + j) % n_dirs)
            });
        let (stride, windows) = if contiguous {
            let starts = (0..n_theta).map(|k| dir_ids[k * n_rays] as usize).collect();
            (n_dirs + n_rays.saturating_sub(1), Some(starts))
        } else {
            (n_dirs, None)
        };

        let mut ranges = vec![0.0; free_cells.len() * stride];
        let width = grid.width();
        ranges
            .par_chunks_mut(stride.max(1) * CELLS_PER_TASK)
            .zip(free_cells.par_chunks(CELLS_PER_TASK))
            .for_each(|(rows, cells)| {
                for (row, &cell) in rows.chunks_mut(stride).zip(cells) {
                    let cell = cell as usize;
                    let (x, y) = grid.cell_center(cell % width, cell / width);
                    for (d, &angle) in dir_angles.iter().enumerate() {
                        let hit = cast_ray(grid, x, y, angle, max_range)
                            .expect("free cell centers are valid ray origins");
                        row[d] = hit.range().unwrap_or(f64::INFINITY);
                    }
                    for d in n_dirs..stride {
                        row[d] = row[d - n_dirs];
                    }
                }
            });

        let mut row_of = vec![u32::MAX; shape.plane()];
        for (r, &c) in free_cells.iter().enumerate() {
            row_of[c as usize] = r as u32;
        }
        Ok(Self {
            shape,
            max_range,
            ray_angles: ray_angles.to_vec(),
            ray_cos: ray_angles.iter().map(|a| a.cos()).collect(),
            free_cells,
            row_of,
            n_dirs,
            stride,
            ranges,
            dir_ids,
            windows,
        })
    }

    pub fn shape(&self) -> &VolumeShape {
        &self.shape
    }

    pub fn ray_angles(&self) -> &[f64] {
        &self.ray_angles
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Number of distinct absolute directions cast per cell.
    pub fn direction_count(&self) -> usize {
        self.n_dirs
    }

    pub fn free_cell_count(&self) -> usize {
        self.free_cells.len()
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.ranges.len() * 8 + (self.free_cells.len() + self.row_of.len() + self.dir_ids.len()) * 4
    }

    /// Evaluates the log-likelihood volume. With `support`, entries whose flag is
    /// false are left at `−∞` without evaluation.
    pub fn log_likelihood(
        &self,
        obs: &DepthObservation,
        mode: UncertaintyMode,
        support: Option<&[bool]>,
    ) -> Result<LikelihoodVolume, ObservationError> {
        let params = self.ray_params(obs, mode)?;
        let shape = self.shape;
        if let Some(s) = support {
            if s.len() != shape.len() {
                return Err(ObservationError::LengthMismatch {
                    what: "support",
                    got: s.len(),
                    expected: shape.len(),
                });
            }
        }
        let terms = params.terms(self);
        let plane = shape.plane();
        let n_theta = shape.n_theta;
        let chunks: Vec<Vec<f64>> = self
            .free_cells
            .par_chunks(CELLS_PER_TASK)
            .enumerate()
            .map(|(chunk_idx, cells)| {
                let mut local = vec![f64::NEG_INFINITY; cells.len() * n_theta];
                let mut gathered = vec![0.0; params.n_rays];
                for (c, &cell) in cells.iter().enumerate() {
                    let row = chunk_idx * CELLS_PER_TASK + c;
                    for k in 0..n_theta {
                        if let Some(s) = support {
                            if !s[k * plane + cell as usize] {
                                continue;
                            }
                        }
                        local[c * n_theta + k] = self.entry(&terms, params.no_valid_rays, row, k, &mut gathered);
                    }
                }
                local
            })
            .collect();

        let mut log_values = vec![f64::NEG_INFINITY; shape.len()];
        for (chunk_idx, local) in chunks.iter().enumerate() {
            let base = chunk_idx * CELLS_PER_TASK;
            for (c, vals) in local.chunks(n_theta).enumerate() {
                let cell = self.free_cells[base + c] as usize;
                for (k, &v) in vals.iter().enumerate() {
                    log_values[k * plane + cell] = v;
                }
            }
        }
        Ok(LikelihoodVolume {
            shape,
            log_values,
            no_valid_rays: params.no_valid_rays,
        })
    }

    /// Adds the log-likelihood to every finite entry of an orientation-major
    /// volume inside `cells`. Entries outside `cells` must already be `−∞`. The
    /// added values equal those of [`RangeTable::log_likelihood`] bit for bit.
    pub fn add_log_likelihood(
        &self,
        obs: &DepthObservation,
        mode: UncertaintyMode,
        log_values: &mut [f64],
        cells: CellBox,
    ) -> Result<(), ObservationError> {
        let params = self.ray_params(obs, mode)?;
        let shape = self.shape;
        if log_values.len() != shape.len() {
            return Err(ObservationError::LengthMismatch {
                what: "log_values",
                got: log_values.len(),
                expected: shape.len(),
            });
        }
        let terms = params.terms(self);
        let (w, plane, n_theta) = (shape.width, shape.plane(), shape.n_theta);
        let rows: Vec<usize> = (cells.j0..cells.j1.min(shape.height)).collect();
        let (i0, i1) = (cells.i0, cells.i1.min(w));
        // cell-major evaluation keeps each table row hot across orientation bins
        let values: &[f64] = log_values;
        let added: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&j| {
                let mut gathered = vec![0.0; params.n_rays];
                let mut out = vec![f64::NEG_INFINITY; (i1 - i0) * n_theta];
                for i in i0..i1 {
                    let cell = j * w + i;
                    let row = self.row_of[cell];
                    if row == u32::MAX {
                        continue;
                    }
                    for k in 0..n_theta {
                        let prior = values[k * plane + cell];
                        if prior != f64::NEG_INFINITY {
                            out[(i - i0) * n_theta + k] =
                                prior + self.entry(&terms, params.no_valid_rays, row as usize, k, &mut gathered);
                        }
                    }
                }
                out
            })
            .collect();
        for (&j, out) in rows.iter().zip(&added) {
            for i in i0..i1 {
                for k in 0..n_theta {
                    log_values[k * plane + j * w + i] = out[(i - i0) * n_theta + k];
                }
            }
        }
        Ok(())
    }

    fn ray_params(&self, obs: &DepthObservation, mode: UncertaintyMode) -> Result<RayParams, ObservationError> {
        if obs.ray_angles != self.ray_angles {
            return Err(ObservationError::AngleMismatch);
        }
        let n_rays = obs.len();
        // invalid rays get zero weight and zero offset
        let mut p = RayParams {
            n_rays,
            no_valid_rays: obs.valid_count() == 0,
            offset: vec![0.0; n_rays],
            inv_scale: vec![0.0; n_rays],
            location: vec![0.0; n_rays],
        };
        for j in 0..n_rays {
            if !obs.valid[j] {
                continue;
            }
            let b = match mode {
                UncertaintyMode::PerRay => obs.scales[j],
                UncertaintyMode::Fixed(b0) => b0.max(B_MIN),
            };
            p.offset[j] = -(2.0 * b).ln();
            p.inv_scale[j] = 1.0 / b;
            p.location[j] = obs.depths[j];
        }
        Ok(p)
    }

    /// Log-likelihood of table row `row` at orientation bin `k`.
    #[inline]
    fn entry(&self, terms: &RayTerms<'_>, no_valid_rays: bool, row: usize, k: usize, gathered: &mut [f64]) -> f64 {
        if no_valid_rays {
            return 0.0;
        }
        let n_rays = gathered.len();
        let ranges = &self.ranges[row * self.stride..(row + 1) * self.stride];
        match &self.windows {
            Some(starts) => terms.sum(&ranges[starts[k]..starts[k] + n_rays]),
            None => {
                for (j, g) in gathered.iter_mut().enumerate() {
                    *g = ranges[self.dir_ids[k * n_rays + j] as usize];
                }
                terms.sum(gathered)
            }
        }
    }
}

struct RayParams {
    n_rays: usize,
    no_valid_rays: bool,
    offset: Vec<f64>,
    inv_scale: Vec<f64>,
    location: Vec<f64>,
}

impl RayParams {
    fn terms<'a>(&'a self, table: &'a RangeTable) -> RayTerms<'a> {
        RayTerms {
            offset: &self.offset,
            inv_scale: &self.inv_scale,
            location: &self.location,
            cos: &table.ray_cos,
            miss: table.max_range,
        }
    }
}

struct RayTerms<'a> {
    offset: &'a [f64],
    inv_scale: &'a [f64],
    location: &'a [f64],
    cos: &'a [f64],
    miss: f64,
}

impl RayTerms<'_> {
    #[inline]
    fn term(&self, j: usize, r: f64) -> f64 {
        let resid = if r.is_finite() {
            (self.location[j] - r * self.cos[j]).abs()
        } else {
            self.miss
        };
        self.offset[j] - resid * self.inv_scale[j]
    }

    /// Sum over rays with four independent accumulators.
    #[inline]
    fn sum(&self, ranges: &[f64]) -> f64 {
        let n = ranges.len();
        let mut acc = [0.0f64; 4];
        let quads = n / 4;
        for q in 0..quads {
            for (lane, a) in acc.iter_mut().enumerate() {
                let j = q * 4 + lane;
                *a += self.term(j, ranges[j]);
            }
        }
        let mut tail = 0.0;
        for j in quads * 4..n {
            tail += self.term(j, ranges[j]);
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }
}

/// Distinct absolute directions `normalize(bin_center(k) + α_j)` and the column of each
/// `(k, j)`. Directions are sorted ascending; near-equal angles (including across the
/// ±π seam) share a column whose angle is that of the lowest `(k, j)` member.
fn distinct_directions(shape: &VolumeShape, ray_angles: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let n_rays = ray_angles.len();
    let mut all: Vec<(f64, usize)> = (0..shape.n_theta)
        .flat_map(|k| {
            let phi = shape.bin_center(k);
            ray_angles
                .iter()
                .enumerate()
                .map(move |(j, &a)| (normalize_angle(phi + a), k * n_rays + j))
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut groups: Vec<Vec<(f64, usize)>> = Vec::new();
    for item in all {
        match groups.last_mut() {
            Some(g) if item.0 - g[g.len() - 1].0 < DIRECTION_MERGE_TOL => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    if groups.len() > 1 {
        let first = groups[0][0].0;
        let last_group = &groups[groups.len() - 1];
        let last = last_group[last_group.len() - 1].0;
        if first + std::f64::consts::TAU - last < DIRECTION_MERGE_TOL {
            let tail = groups.pop().unwrap();
            groups[0].extend(tail);
        }
    }

    let mut dir_angles = Vec::with_capacity(groups.len());
    let mut dir_ids = vec![0u32; shape.n_theta * n_rays];
    for (d, g) in groups.iter().enumerate() {
        let canonical = g.iter().min_by_key(|(_, idx)| *idx).unwrap().0;
        dir_angles.push(canonical);
        for &(_, idx) in g {
            dir_ids[idx] = d as u32;
        }
    }
    (dir_angles, dir_ids)
}

/// Builds a one-off range table and evaluates the full volume.
pub fn log_likelihood_volume(
    grid: &OccupancyGrid,
    obs: &DepthObservation,
    n_theta: usize,
    max_range: f64,
    mode: UncertaintyMode,
) -> Result<LikelihoodVolume, ObservationError> {
    RangeTable::build(grid, &obs.ray_angles, n_theta, max_range)?.log_likelihood(obs, mode, None)
}
