// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FilterError;
use crate::floorplan::OccupancyGrid;
use crate::observation::LikelihoodVolume;
use crate::pgm;
use crate::pose::Pose2;
use crate::volume::{CellBox, VolumeShape};

/// Entries below `max − UNDERFLOW` contribute exactly zero after exponentiation.
pub(crate) const UNDERFLOW: f64 = 745.0;

/// Log-probability volume over `(x, y, θ)`. Occupied cells always hold `−∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVolume {
    pub(crate) shape: VolumeShape,
    pub(crate) free: Arc<Vec<bool>>,
    pub(crate) log_values: Vec<f64>,
    /// Tight bounding box of the cells holding finite entries.
    pub(crate) bbox: CellBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub map_pose: Pose2,
    pub map_prob: f64,
    /// Shannon entropy in nats.
    pub entropy: f64,
}

/// Uniform belief over every free cell and orientation.
pub fn init_uniform(grid: &OccupancyGrid, n_theta: usize) -> Result<BeliefVolume, FilterError> {
    if n_theta == 0 {
        return Err(FilterError::InvalidConfig("n_theta must be at least 1".into()));
    }
    let free = grid.free_space_mask();
    let n_free = free.iter().filter(|&&f| f).count();
    if n_free == 0 {
        return Err(FilterError::EmptyFreeSpace);
    }
    let shape = VolumeShape::for_grid(grid, n_theta);
    let log_p = -((n_free * n_theta) as f64).ln();
    let mut log_values = Vec::with_capacity(shape.len());
    for _ in 0..n_theta {
        log_values.extend(free.iter().map(|&f| if f { log_p } else { f64::NEG_INFINITY }));
    }
    let bbox = finite_box(&shape, &log_values);
    Ok(BeliefVolume {
        shape,
        free: Arc::new(free),
        log_values,
        bbox,
    })
}

impl BeliefVolume {
    /// Builds a belief from arbitrary log-weights, zeroing occupied cells and normalizing.
    pub fn from_log_weights(grid: &OccupancyGrid, n_theta: usize, mut log_values: Vec<f64>) -> Result<Self, FilterError> {
        let shape = VolumeShape::for_grid(grid, n_theta);
        if log_values.len() != shape.len() {
            return Err(FilterError::ShapeMismatch(format!(
                "{} weights for a volume of {}",
                log_values.len(),
                shape.len()
            )));
        }
        if log_values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(FilterError::InvalidConfig("log-weights must be finite or -inf".into()));
        }
        let free = Arc::new(grid.free_space_mask());
        mask_occupied(&shape, &free, &mut log_values);
        let bbox = normalize_box(&shape, &mut log_values, shape.full_box())?;
        Ok(Self {
            shape,
            free,
            log_values,
            bbox,
        })
    }

    pub fn shape(&self) -> &VolumeShape {
        &self.shape
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn probability(&self, idx: usize) -> f64 {
        self.log_values[idx].exp()
    }

    /// Total probability mass.
    pub fn total_mass(&self) -> f64 {
        self.log_values.iter().map(|v| v.exp()).sum()
    }

    pub fn entropy(&self) -> f64 {
        let (w, b) = (self.shape.width, self.bbox);
        let mut h = 0.0;
        for slice in self.log_values.chunks(self.shape.plane()) {
            for j in b.j0..b.j1 {
                for &v in &slice[j * w + b.i0..j * w + b.i1] {
                    if v.is_finite() {
                        h -= v.exp() * v;
                    }
                }
            }
        }
        h
    }

    /// Tight bounding box of the cells with non-zero probability.
    pub fn support_box(&self) -> CellBox {
        self.bbox
    }

    /// Flags of entries with non-zero probability.
    pub fn support(&self) -> Vec<bool> {
        self.log_values.iter().map(|v| v.is_finite()).collect()
    }

    pub fn summary(&self) -> BeliefSummary {
        let (map_pose, map_prob) = map_pose(self);
        BeliefSummary {
            map_pose,
            map_prob,
            entropy: self.entropy(),
        }
    }

    /// Per-cell maximum probability over orientations, row-major.
    pub fn max_marginal(&self) -> Vec<f64> {
        let plane = self.shape.plane();
        let mut out = vec![0.0f64; plane];
        for slice in self.log_values.chunks(plane) {
            for (o, &v) in out.iter_mut().zip(slice) {
                *o = o.max(v.exp());
            }
        }
        out
    }

    /// Max-over-orientation marginal scaled to its peak, as P2.
    pub fn heatmap_pgm(&self) -> String {
        let marg = self.max_marginal();
        let peak = marg.iter().copied().fold(0.0, f64::max);
        let values: Vec<f64> = marg.iter().map(|&v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
        pgm::heatmap_p2(self.shape.width, self.shape.height, &values)
    }
}

/// Entry-wise product with the likelihood followed by normalization.
pub fn observation_update(belief: &BeliefVolume, lik: &LikelihoodVolume) -> Result<BeliefVolume, FilterError> {
    if belief.shape != lik.shape {
        return Err(FilterError::ShapeMismatch(format!(
            "belief {}x{}x{} vs likelihood {}x{}x{}",
            belief.shape.width,
            belief.shape.height,
            belief.shape.n_theta,
            lik.shape.width,
            lik.shape.height,
            lik.shape.n_theta
        )));
    }
    let mut out = belief.clone();
    let (w, b) = (out.shape.width, out.bbox);
    out.log_values
        .par_chunks_mut(out.shape.plane())
        .zip(lik.log_values.par_chunks(out.shape.plane()))
        .for_each(|(dst, src)| {
            for j in b.j0..b.j1 {
                for i in b.i0..b.i1 {
                    dst[j * w + i] += src[j * w + i];
                }
            }
        });
    out.renormalize()?;
    Ok(out)
}

/// Center pose of the most probable entry and its probability. Ties go to the
/// smallest `(k, j, i)`, i.e. the lowest flat index.
pub fn map_pose(belief: &BeliefVolume) -> (Pose2, f64) {
    let shape = &belief.shape;
    let b = belief.bbox;
    let mut best = shape.index(0, b.j0, b.i0);
    for k in 0..shape.n_theta {
        for j in b.j0..b.j1 {
            for i in b.i0..b.i1 {
                let idx = shape.index(k, j, i);
                if belief.log_values[idx] > belief.log_values[best] {
                    best = idx;
                }
            }
        }
    }
    (shape.pose_at(best), belief.log_values[best].exp())
}

impl BeliefVolume {
    /// Normalizes inside the bounding box and tightens it.
    pub(crate) fn renormalize(&mut self) -> Result<(), FilterError> {
        self.bbox = normalize_box(&self.shape, &mut self.log_values, self.bbox)?;
        Ok(())
    }

    /// Uniform over free space.
    pub(crate) fn reset_uniform(&mut self) {
        let n_free = self.free.iter().filter(|&&f| f).count();
        let log_p = -((n_free * self.shape.n_theta) as f64).ln();
        for slice in self.log_values.chunks_mut(self.shape.plane()) {
            for (v, &f) in slice.iter_mut().zip(self.free.iter()) {
                *v = if f { log_p } else { f64::NEG_INFINITY };
            }
        }
        self.bbox = finite_box(&self.shape, &self.log_values);
    }
}

pub(crate) fn mask_occupied(shape: &VolumeShape, free: &[bool], log_values: &mut [f64]) {
    for slice in log_values.chunks_mut(shape.plane()) {
        for (v, &f) in slice.iter_mut().zip(free) {
            if !f {
                *v = f64::NEG_INFINITY;
            }
        }
    }
}

/// Bounding box of the cells holding a finite entry in any plane.
pub(crate) fn finite_box(shape: &VolumeShape, log_values: &[f64]) -> CellBox {
    let w = shape.width;
    let mut b = CellBox::EMPTY;
    for slice in log_values.chunks(shape.plane()) {
        for (c, v) in slice.iter().enumerate() {
            if v.is_finite() {
                b.include(c % w, c / w);
            }
        }
    }
    b
}

/// Subtracts the log-sum-exp of the entries inside `cells` (all others must be
/// `−∞`) and returns the tight box of finite entries. Per-plane partial results
/// are combined in plane order, independent of the thread count.
pub(crate) fn normalize_box(shape: &VolumeShape, log_values: &mut [f64], cells: CellBox) -> Result<CellBox, FilterError> {
    let plane = shape.plane();
    let w = shape.width;
    let rows = move |slice: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(cells.area());
        for j in cells.j0..cells.j1 {
            out.extend_from_slice(&slice[j * w + cells.i0..j * w + cells.i1]);
        }
        out
    };
    let max = log_values
        .par_chunks(plane)
        .map(|s| rows(s).into_iter().fold(f64::NEG_INFINITY, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(FilterError::AllZeroPosterior);
    }
    let partial: Vec<f64> = log_values
        .par_chunks(plane)
        .map(|s| {
            rows(s)
                .into_iter()
                .filter(|&v| v - max > -UNDERFLOW)
                .map(|v| (v - max).exp())
                .sum::<f64>()
        })
        .collect();
    let lse = max + partial.iter().sum::<f64>().ln();
    let boxes: Vec<CellBox> = log_values
        .par_chunks_mut(plane)
        .map(|s| {
            let mut b = CellBox::EMPTY;
            for j in cells.j0..cells.j1 {
                for i in cells.i0..cells.i1 {
                    let v = &mut s[j * w + i];
                    if *v > f64::NEG_INFINITY {
                        *v -= lse;
                        b.include(i, j);
                    }
                }
            }
            b
        })
        .collect();
    Ok(boxes.into_iter().fold(CellBox::EMPTY, CellBox::union))
}
