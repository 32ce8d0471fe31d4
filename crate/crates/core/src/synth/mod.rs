// SPDX-License-Identifier: Apache-2.0

//! Procedural floorplans, random-walk trajectories and synthetic depth observers.

mod floorplan;
mod observer;
mod trajectory;

pub use floorplan::{gen_corridor, gen_floorplan, FloorplanStyle};
pub use observer::{
    laplace_from_uniform, observe, Calibration, CorruptionMode, FileObserver, GtObserver, NoiseModel, NoisyObserver,
    ObservationSource, RayDraw, DEFAULT_GT_SCALE,
};
pub use trajectory::{
    gen_trajectory, gen_trajectory_with, has_clearance, Trajectory, CLEARANCE, DEFAULT_HEADING_QUANTUM, DEFAULT_STEP_MEAN,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::floorplan::FloorplanError;
use crate::observation::ObservationError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("stuck trajectory: {0}")]
    StuckTrajectory(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Floorplan(#[from] FloorplanError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
}
