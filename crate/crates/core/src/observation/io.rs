// SPDX-License-Identifier: Apache-2.0

//! JSON-lines observation files, one frame per line:
//! `{"frame": 0, "angles": [...], "depths": [...], "scales": [...], "valid": [...]}`.
//! Angles in radians, depths and scales in meters.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DepthObservation, ObservationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub frame: usize,
    pub angles: Vec<f64>,
    pub depths: Vec<f64>,
    pub scales: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ObservationRecord {
    pub fn new(frame: usize, obs: &DepthObservation) -> Self {
        // JSON has no NaN; invalid rays are written with zero depth
        let depths = obs
            .depths
            .iter()
            .zip(&obs.valid)
            .map(|(&d, &v)| if v && d.is_finite() { d } else { 0.0 })
            .collect();
        Self {
            frame,
            angles: obs.ray_angles.clone(),
            depths,
            scales: obs.scales.clone(),
            valid: obs.valid.clone(),
        }
    }

    pub fn into_observation(self) -> Result<DepthObservation, ObservationError> {
        DepthObservation::new(self.angles, self.depths, self.scales, self.valid)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[ObservationRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads every non-empty line as one frame.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<(usize, DepthObservation)>, ObservationError> {
    let mut frames = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObservationRecord = serde_json::from_str(&line).map_err(|e| ObservationError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let frame = rec.frame;
        let obs = rec.into_observation().map_err(|e| ObservationError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        frames.push((frame, obs));
    }
    Ok(frames)
}
