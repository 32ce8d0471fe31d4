// SPDX-License-Identifier: Apache-2.0

//! Histogram Bayes filter over `(x, y, θ)`: uniform initialization, decoupled
//! translation/rotation prediction, Laplace observation update and MAP readout.

mod belief;
mod transition;

pub use belief::{init_uniform, map_pose, observation_update, BeliefSummary, BeliefVolume};
pub use transition::transition_update;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorplan::OccupancyGrid;
use crate::observation::{DepthObservation, ObservationError, RangeTable, UncertaintyMode};
use crate::pose::{normalize_angle, Pose2};

/// Default transition noise `(σ_x, σ_y, σ_φ)` in meters, meters, radians.
pub const DEFAULT_SIGMA: (f64, f64, f64) = (0.1, 0.1, 0.05);

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("floorplan has no free cell")]
    EmptyFreeSpace,
    #[error("posterior is zero everywhere: observation incompatible with the prior support")]
    AllZeroPosterior,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid motion: {0}")]
    InvalidMotion(String),
    #[error(transparent)]
    Observation(#[from] ObservationError),
}

/// Measured relative motion in the previous pose's frame with its noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionInput {
    /// `(t_x, t_y, t_φ)` in meters, meters, radians.
    pub t: (f64, f64, f64),
    /// `(σ_x, σ_y, σ_φ)`, each non-negative.
    pub sigma: (f64, f64, f64),
}

impl MotionInput {
    pub fn new(t: (f64, f64, f64), sigma: (f64, f64, f64)) -> Result<Self, FilterError> {
        if ![t.0, t.1, t.2].iter().all(|v| v.is_finite()) {
            return Err(FilterError::InvalidMotion("translation must be finite".into()));
        }
        if ![sigma.0, sigma.1, sigma.2].iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(FilterError::InvalidMotion("sigma components must be finite and non-negative".into()));
        }
        Ok(Self {
            t: (t.0, t.1, normalize_angle(t.2)),
            sigma,
        })
    }

    /// No motion and no noise.
    pub fn identity() -> Self {
        Self {
            t: (0.0, 0.0, 0.0),
            sigma: (0.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_theta: usize,
    pub max_range: f64,
    pub mode: UncertaintyMode,
    /// Observation update every `obs_interval` frames (Δt).
    pub obs_interval: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_theta: 36,
            max_range: crate::floorplan::DEFAULT_MAX_RANGE,
            mode: UncertaintyMode::PerRay,
            obs_interval: 1,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.n_theta == 0 {
            return Err(FilterError::InvalidConfig("n_theta must be at least 1".into()));
        }
        if self.obs_interval == 0 {
            return Err(FilterError::InvalidConfig("obs_interval must be at least 1".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(FilterError::InvalidConfig("max_range must be positive".into()));
        }
        if let UncertaintyMode::Fixed(b) = self.mode {
            if !(b > 0.0 && b.is_finite()) {
                return Err(FilterError::InvalidConfig("fixed scale must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-frame filter output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: usize,
    pub map_pose: Pose2,
    pub map_prob: f64,
    pub entropy: f64,
    pub observed: bool,
}

/// Wall-clock time spent per filter stage, accumulated over steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    /// Prediction (motion update).
    pub transition: Duration,
    /// Likelihood evaluation and the product with the prior, table builds excluded.
    pub matching: Duration,
    pub frames: usize,
    pub observed_frames: usize,
}

/// Incremental filter: one [`Localizer::step`] per frame. The range table is
/// built on the first observation and reused while the ray angles match.
pub struct Localizer {
    grid: OccupancyGrid,
    config: FilterConfig,
    table: Option<Arc<RangeTable>>,
    belief: BeliefVolume,
    frame: usize,
    times: StageTimes,
}

impl Localizer {
    pub fn new(grid: &OccupancyGrid, config: FilterConfig) -> Result<Self, FilterError> {
        config.validate()?;
        let belief = init_uniform(grid, config.n_theta)?;
        Ok(Self {
            grid: grid.clone(),
            config,
            table: None,
            belief,
            frame: 0,
            times: StageTimes::default(),
        })
    }

    /// Continues from an existing belief; `next_frame` sets the Δt phase.
    pub fn resume(grid: &OccupancyGrid, config: FilterConfig, belief: BeliefVolume, next_frame: usize) -> Result<Self, FilterError> {
        config.validate()?;
        let shape = crate::volume::VolumeShape::for_grid(grid, config.n_theta);
        if belief.shape != shape {
            return Err(FilterError::ShapeMismatch("belief does not match the grid".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            config,
            table: None,
            belief,
            frame: next_frame,
            times: StageTimes::default(),
        })
    }

    /// Shares a prebuilt range table; it must match the grid and `n_theta`.
    pub fn with_table(mut self, table: Arc<RangeTable>) -> Result<Self, FilterError> {
        if *table.shape() != self.belief.shape || table.max_range() != self.config.max_range {
            return Err(FilterError::ShapeMismatch("range table does not match the filter".into()));
        }
        self.table = Some(table);
        Ok(self)
    }

    pub fn stage_times(&self) -> StageTimes {
        self.times
    }

    pub fn belief(&self) -> &BeliefVolume {
        &self.belief
    }

    pub fn into_belief(self) -> BeliefVolume {
        self.belief
    }

    pub fn table(&self) -> Option<&Arc<RangeTable>> {
        self.table.as_ref()
    }

    /// Index of the next frame.
    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Whether frame `i` takes an observation update.
    pub fn observes(&self, frame: usize) -> bool {
        frame % self.config.obs_interval == 0
    }

    /// Transition, then the observation update when one is present and due. The
    /// likelihood is only evaluated where the predicted belief is non-zero. After
    /// an error the localizer must not be stepped again.
    pub fn step(&mut self, motion: &MotionInput, obs: Option<&DepthObservation>) -> Result<FrameResult, FilterError> {
        let start = Instant::now();
        transition::transition_in_place(&mut self.belief, motion);
        self.times.transition += start.elapsed();
        let observe = self.observes(self.frame) && obs.is_some();
        if let Some(o) = obs.filter(|_| observe) {
            let table = self.table_for(&o.ray_angles)?;
            let start = Instant::now();
            let cells = self.belief.bbox;
            table.add_log_likelihood(o, self.config.mode, &mut self.belief.log_values, cells)?;
            self.belief.renormalize()?;
            self.times.matching += start.elapsed();
            self.times.observed_frames += 1;
        }
        self.times.frames += 1;
        let summary = self.belief.summary();
        let out = FrameResult {
            frame: self.frame,
            map_pose: summary.map_pose,
            map_prob: summary.map_prob,
            entropy: summary.entropy,
            observed: observe,
        };
        self.frame += 1;
        Ok(out)
    }

    fn table_for(&mut self, ray_angles: &[f64]) -> Result<Arc<RangeTable>, FilterError> {
        match &self.table {
            Some(t) if t.ray_angles() == ray_angles => Ok(Arc::clone(t)),
            _ => {
                let t = Arc::new(RangeTable::build(&self.grid, ray_angles, self.config.n_theta, self.config.max_range)?);
                self.table = Some(Arc::clone(&t));
                Ok(t)
            }
        }
    }
}

/// Runs the filter from a uniform prior. `motions[i]` leads into frame `i`; the
/// first entry is usually [`MotionInput::identity`].
pub fn run_sequence(
    grid: &OccupancyGrid,
    observations: &[Option<DepthObservation>],
    motions: &[MotionInput],
    config: FilterConfig,
) -> Result<(Vec<FrameResult>, BeliefVolume), FilterError> {
    if observations.len() != motions.len() {
        return Err(FilterError::ShapeMismatch(format!(
            "{} observations for {} motions",
            observations.len(),
            motions.len()
        )));
    }
    let mut loc = Localizer::new(grid, config)?;
    let mut out = Vec::with_capacity(motions.len());
    for (m, o) in motions.iter().zip(observations) {
        out.push(loc.step(m, o.as_ref())?);
    }
    Ok((out, loc.into_belief()))
}
