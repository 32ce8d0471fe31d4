// SPDX-License-Identifier: Apache-2.0

//! Depth observations: per-column predictions, their resampling onto equiangular
//! rays, and Laplace matching against the floorplan.

mod io;
mod likelihood;
mod nll;

pub use io::{read_jsonl, write_jsonl, ObservationRecord};
pub use likelihood::{log_likelihood_volume, LikelihoodVolume, RangeTable, UncertaintyMode};
pub use nll::laplace_nll;

use thiserror::Error;

use crate::floorplan::FloorplanError;
use crate::gravity::CameraModel;

/// Smallest Laplace scale accepted anywhere, in meters.
pub const B_MIN: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid observation: {0}")]
    Invalid(String),
    #[error("floorplan has no free cell")]
    EmptyFreeSpace,
    #[error("observation ray angles differ from the range table's angles")]
    AngleMismatch,
    #[error(transparent)]
    Floorplan(#[from] FloorplanError),
    #[error("observation file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bearing of an image column's center: `atan((u + 0.5 − cx) / fx)`.
pub fn column_angle(camera: &CameraModel, u: usize) -> f64 {
    ((u as f64 + 0.5 - camera.cx) / camera.fx).atan()
}

/// Per-column depth and Laplace scale, as produced by a depth predictor.
///
/// With `D` columns over an image of width `W`, column `c` is centered on pixel
/// `(c + 0.5)·W/D − 0.5`; for `D = W` this is pixel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnPrediction {
    depths: Vec<f64>,
    scales: Vec<f64>,
    camera: CameraModel,
}

impl ColumnPrediction {
    /// Scales below [`B_MIN`] are raised to it.
    pub fn new(depths: Vec<f64>, scales: Vec<f64>, camera: CameraModel) -> Result<Self, ObservationError> {
        if scales.len() != depths.len() {
            return Err(ObservationError::LengthMismatch {
                what: "scales",
                got: scales.len(),
                expected: depths.len(),
            });
        }
        if depths.is_empty() {
            return Err(ObservationError::Invalid("prediction has no columns".into()));
        }
        if scales.iter().any(|b| b.is_nan()) {
            return Err(ObservationError::Invalid("NaN scale".into()));
        }
        let scales = scales.into_iter().map(|b| b.max(B_MIN)).collect();
        Ok(Self {
            depths,
            scales,
            camera,
        })
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Bearing of column `c`.
    pub fn column_bearing(&self, c: usize) -> f64 {
        let cam = &self.camera;
        let pixel_center = (c as f64 + 0.5) * cam.width as f64 / self.depths.len() as f64;
        ((pixel_center - cam.cx) / cam.fx).atan()
    }
}

/// Observation `o_t`: equiangular rays relative to the heading with depth, Laplace
/// scale and validity. Depth and scale of invalid rays carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthObservation {
    pub ray_angles: Vec<f64>,
    pub depths: Vec<f64>,
    pub scales: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthObservation {
    /// Validates shapes and raises scales to [`B_MIN`].
    pub fn new(
        ray_angles: Vec<f64>,
        depths: Vec<f64>,
        scales: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, ObservationError> {
        let n = ray_angles.len();
        for (what, got) in [("depths", depths.len()), ("scales", scales.len()), ("valid", valid.len())] {
            if got != n {
                return Err(ObservationError::LengthMismatch {
                    what,
                    got,
                    expected: n,
                });
            }
        }
        if ray_angles.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ObservationError::Invalid("ray angles must be strictly ascending".into()));
        }
        if ray_angles
            .iter()
            .any(|a| !(a.abs() < std::f64::consts::FRAC_PI_2))
        {
            return Err(ObservationError::Invalid("ray angles must lie in (-π/2, π/2)".into()));
        }
        for j in 0..n {
            if valid[j] && !(depths[j].is_finite() && scales[j].is_finite()) {
                return Err(ObservationError::Invalid(format!("ray {j} is valid but not finite")));
            }
        }
        let scales = scales
            .into_iter()
            .map(|b| if b.is_finite() { b.max(B_MIN) } else { B_MIN })
            .collect();
        Ok(Self {
            ray_angles,
            depths,
            scales,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.ray_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ray_angles.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// `n` equiangular ray offsets across the horizontal FoV, each at the center of its
/// angular slot: `−FoV/2 + δ, …, FoV/2 − δ` with `δ` half the spacing.
pub fn equiangular_rays(camera: &CameraModel, n: usize) -> Vec<f64> {
    let fov = camera.hfov();
    let spacing = fov / n as f64;
    (0..n)
        .map(|j| -fov / 2.0 + spacing * (j as f64 + 0.5))
        .collect()
}

/// Linear interpolation of depths and scales at equiangular rays. Rays outside the
/// bearing range spanned by the column centers are invalid.
pub fn resample_to_rays(pred: &ColumnPrediction, n_rays: usize) -> DepthObservation {
    let angles = equiangular_rays(pred.camera(), n_rays);
    let bearings: Vec<f64> = (0..pred.len()).map(|c| pred.column_bearing(c)).collect();
    let (first, last) = (bearings[0], bearings[bearings.len() - 1]);
    let mut depths = Vec::with_capacity(n_rays);
    let mut scales = Vec::with_capacity(n_rays);
    let mut valid = Vec::with_capacity(n_rays);
    for &a in &angles {
        if a < first || a > last {
            depths.push(0.0);
            scales.push(B_MIN);
            valid.push(false);
            continue;
        }
        let hi = bearings.partition_point(|&b| b < a);
        if bearings[hi] == a {
            depths.push(pred.depths[hi]);
            scales.push(pred.scales[hi]);
        } else {
            let lo = hi - 1;
            let f = (a - bearings[lo]) / (bearings[hi] - bearings[lo]);
            depths.push(pred.depths[lo] + f * (pred.depths[hi] - pred.depths[lo]));
            scales.push(pred.scales[lo] + f * (pred.scales[hi] - pred.scales[lo]));
        }
        valid.push(true);
    }
    DepthObservation::new(angles, depths, scales, valid).expect("resampled rays are well formed")
}
