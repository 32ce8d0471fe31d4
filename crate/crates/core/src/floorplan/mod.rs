// SPDX-License-Identifier: Apache-2.0

//! Occupancy-grid floorplans: the grid type, its file formats and the ray caster
//! that produces reference floorplan depths.

mod grid;
mod io;
mod raycast;

pub use grid::{Cell, OccupancyGrid};
pub use io::{load_grid, GridFormat, GridMeta};
pub use raycast::{cast_ray, floorplan_depth, RayHit};

use std::path::PathBuf;

use thiserror::Error;

/// Default ray length limit in meters.
pub const DEFAULT_MAX_RANGE: f64 = 50.0;

#[derive(Debug, Error)]
pub enum FloorplanError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed grid file: {0}")]
    MalformedFile(String),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDims(String),
    #[error("grid has zero area")]
    ZeroArea,
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("ray origin ({x:.3}, {y:.3}) lies in an occupied cell")]
    OriginOccupied { x: f64, y: f64 },
    #[error("ray origin ({x:.3}, {y:.3}) lies outside the grid")]
    OriginOutside { x: f64, y: f64 },
}
