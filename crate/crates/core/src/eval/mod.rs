// SPDX-License-Identifier: Apache-2.0

//! Sequence metrics, single-frame recall and the seeded benchmark harness.

mod bench;
mod config;
mod metrics;

pub use bench::{
    run_benchmark, run_benchmark_with, sequence_noise_seed, trajectory_seed, write_frame_log, BenchReport, FrameRecord,
    LengthReport, RunSummary, SuccessReport, Timings, VariantReport, VariantTimings, REPORT_VERSION,
};
pub use config::{
    BenchConfig, CameraSpec, MapSource, ObserverSpec, OverrideNote, Overrides, TrajectorySpec, UncertaintySpec,
    VariantSpec, SCHEMA_VERSION,
};
pub use metrics::{
    default_recall_thresholds, position_errors, rmse_window, sequence_success, single_frame_recall, RecallEntry,
    RecallThreshold, SequenceResult,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::filter::FilterError;
use crate::floorplan::FloorplanError;
use crate::observation::ObservationError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequence of {len} frames is shorter than the window of {window}")]
    TooShort { len: usize, window: usize },
    #[error("{est} estimates for {gt} true poses")]
    LengthMismatch { est: usize, gt: usize },
    #[error("config key {key}: {message}")]
    Config { key: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Floorplan(#[from] FloorplanError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl EvalError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
