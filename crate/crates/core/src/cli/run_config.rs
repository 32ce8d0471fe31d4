// SPDX-License-Identifier: Apache-2.0

//! Configuration of one `localize` run. Relative paths in a file resolve against
//! the file's directory.
//!
//! ```json
//! {
//!   "map": {"kind": "file", "path": "map.json"},
//!   "trajectory": {"kind": "generated", "seed": 3, "length": 100},
//!   "observer": {"kind": "noisy", "noise": {"base_scale": 0.1, "corrupt_prob": 0.2,
//!     "corrupt_scale": 2.0, "calibration": {"kind": "oracle"}, "rng_seed": 7}},
//!   "uncertainty": {"kind": "per_ray"},
//!   "n_rays": 40, "n_theta": 36, "grid_resolution": null,
//!   "sigma": [0.1, 0.1, 0.05], "max_range": 50.0, "obs_interval": 1,
//!   "threshold_m": 1.0, "window": 10, "output_dir": null, "heatmaps": false
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, LocalizeArgs, NoiseArgs};
use crate::eval::{CameraSpec, OverrideNote, UncertaintySpec};
use crate::floorplan::GridMeta;
use crate::synth::{Calibration, CorruptionMode, FloorplanStyle, NoiseModel, DEFAULT_GT_SCALE, DEFAULT_STEP_MEAN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunMap {
    /// json-grid, or pgm with `meta` or a sidecar.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<GridMeta>,
    },
    Generated {
        style: FloorplanStyle,
        extent_m: f64,
        resolution: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunTrajectory {
    File {
        path: PathBuf,
    },
    Generated {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_length")]
        length: usize,
        #[serde(default = "default_step_mean")]
        step_mean: f64,
        #[serde(default = "default_sigma")]
        motion_noise: [f64; 3],
        #[serde(default = "default_quantum")]
        heading_quantum_deg: f64,
    },
}

impl Default for RunTrajectory {
    fn default() -> Self {
        RunTrajectory::Generated {
            seed: 0,
            length: default_length(),
            step_mean: default_step_mean(),
            motion_noise: default_sigma(),
            heading_quantum_deg: default_quantum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunObserver {
    Gt {
        #[serde(default = "default_gt_scale")]
        scale: f64,
    },
    /// The noise seed is used as given.
    Noisy { noise: NoiseModel },
    /// Replays `observations`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub map: Option<RunMap>,
    #[serde(default)]
    pub trajectory: RunTrajectory,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default = "default_n_rays")]
    pub n_rays: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default)]
    pub grid_resolution: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: [f64; 3],
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_observer")]
    pub observer: RunObserver,
    /// Observation JSONL for the file observer.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default = "one")]
    pub obs_interval: usize,
    #[serde(default = "default_threshold")]
    pub threshold_m: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub heatmaps: bool,
}

fn one() -> usize {
    1
}
fn default_length() -> usize {
    100
}
fn default_step_mean() -> f64 {
    DEFAULT_STEP_MEAN
}
fn default_sigma() -> [f64; 3] {
    [0.1, 0.1, 0.05]
}
fn default_quantum() -> f64 {
    10.0
}
fn default_gt_scale() -> f64 {
    DEFAULT_GT_SCALE
}
fn default_n_rays() -> usize {
    40
}
fn default_n_theta() -> usize {
    36
}
fn default_max_range() -> f64 {
    crate::floorplan::DEFAULT_MAX_RANGE
}
fn default_observer() -> RunObserver {
    RunObserver::Gt {
        scale: DEFAULT_GT_SCALE,
    }
}
fn default_threshold() -> f64 {
    1.0
}
fn default_window() -> usize {
    10
}

/// Noise model used when a flag selects the noisy observer without a configured one.
pub fn default_noise() -> NoiseModel {
    NoiseModel {
        base_scale: 0.1,
        corrupt_prob: 0.0,
        corrupt_scale: 2.0,
        calibration: Calibration::Oracle,
        rng_seed: 0,
        corruption: CorruptionMode::Sector,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every key has a default")
    }
}

fn usage(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config key {key}: {message}"))
}

fn note<T: Serialize>(notes: &mut Vec<OverrideNote>, key: &str, config: &T, flag: &T) {
    notes.push(OverrideNote {
        key: key.to_string(),
        config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        flag: serde_json::to_value(flag).unwrap_or(serde_json::Value::Null),
    });
}

/// Applies the noise flags to `noise`, recording each under `observer.noise.*`.
pub(super) fn apply_noise_flags(noise: &mut NoiseModel, flags: &NoiseArgs, notes: &mut Vec<OverrideNote>) {
    if let Some(v) = flags.base_scale {
        note(notes, "observer.noise.base_scale", &noise.base_scale, &v);
        noise.base_scale = v;
    }
    if let Some(v) = flags.corrupt_prob {
        note(notes, "observer.noise.corrupt_prob", &noise.corrupt_prob, &v);
        noise.corrupt_prob = v;
    }
    if let Some(v) = flags.corrupt_scale {
        note(notes, "observer.noise.corrupt_scale", &noise.corrupt_scale, &v);
        noise.corrupt_scale = v;
    }
    if let Some(v) = flags.calibration {
        note(notes, "observer.noise.calibration", &noise.calibration, &v);
        noise.calibration = v;
    }
    if let Some(v) = flags.corruption {
        note(notes, "observer.noise.corruption", &noise.corruption, &v);
        noise.corruption = v;
    }
    if let Some(v) = flags.noise_seed {
        note(notes, "observer.noise.rng_seed", &noise.rng_seed, &v);
        noise.rng_seed = v;
    }
}

pub(super) fn has_noise_flags(flags: &NoiseArgs) -> bool {
    flags.base_scale.is_some()
        || flags.corrupt_prob.is_some()
        || flags.corrupt_scale.is_some()
        || flags.calibration.is_some()
        || flags.corruption.is_some()
        || flags.noise_seed.is_some()
}

/// Parses `per-ray`, `pooled` or `fixed:B0`.
pub(super) fn parse_uncertainty(s: &str) -> Result<UncertaintySpec, CliError> {
    match s.split_once(':') {
        None if s == "per-ray" || s == "per_ray" => Ok(UncertaintySpec::PerRay),
        None if s == "pooled" => Ok(UncertaintySpec::Pooled),
        Some(("fixed", v)) => v
            .parse()
            .map(|b0| UncertaintySpec::Fixed { b0 })
            .map_err(|e| CliError::Usage(format!("--uncertainty {s:?}: {e}"))),
        _ => Err(CliError::Usage(format!("--uncertainty {s:?}: expected per-ray, pooled or fixed:B0"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| usage("<document>", e))
    }

    /// Reads a file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(RunMap::File { path, .. }) = &mut config.map {
            resolve(path);
        }
        if let RunTrajectory::File { path } = &mut config.trajectory {
            resolve(path);
        }
        if let Some(p) = &mut config.observations {
            resolve(p);
        }
        if let Some(p) = &mut config.output_dir {
            resolve(p);
        }
        Ok(config)
    }

    /// Applies flag values; flags win and each replaced key is recorded.
    pub fn apply(&mut self, flags: &LocalizeArgs) -> Result<Vec<OverrideNote>, CliError> {
        let mut notes = Vec::new();
        if let Some(path) = &flags.map.map {
            let meta = match (flags.map.map_resolution, flags.map.map_origin) {
                (Some(resolution), origin) => Some(GridMeta {
                    resolution,
                    origin: origin.map_or([0.0, 0.0], |(x, y)| [x, y]),
                }),
                (None, Some(_)) => return Err(CliError::Usage("--map-origin needs --map-resolution".into())),
                (None, None) => None,
            };
            let new = RunMap::File {
                path: path.clone(),
                meta,
            };
            note(&mut notes, "map", &self.map, &Some(new.clone()));
            self.map = Some(new);
        }

        if let Some(path) = &flags.trajectory {
            if flags.traj_seed.is_some() || flags.length.is_some() {
                return Err(CliError::Usage("--trajectory excludes --traj-seed and --length".into()));
            }
            let new = RunTrajectory::File { path: path.clone() };
            note(&mut notes, "trajectory", &self.trajectory, &new);
            self.trajectory = new;
        } else if flags.traj_seed.is_some() || flags.length.is_some() {
            if matches!(self.trajectory, RunTrajectory::File { .. }) {
                note(&mut notes, "trajectory", &self.trajectory, &RunTrajectory::default());
                self.trajectory = RunTrajectory::default();
            }
            if let RunTrajectory::Generated { seed, length, .. } = &mut self.trajectory {
                if let Some(s) = flags.traj_seed {
                    note(&mut notes, "trajectory.seed", seed, &s);
                    *seed = s;
                }
                if let Some(l) = flags.length {
                    note(&mut notes, "trajectory.length", length, &l);
                    *length = l;
                }
            }
        }

        self.apply_observer(&flags.noise, &mut notes)?;

        let cam = flags.camera;
        if let Some(v) = cam.hfov_deg {
            note(&mut notes, "camera.hfov_deg", &self.camera.hfov_deg, &v);
            self.camera.hfov_deg = v;
        }
        if let Some(v) = cam.width {
            note(&mut notes, "camera.width", &self.camera.width, &v);
            self.camera.width = v;
        }
        if let Some(v) = cam.height {
            note(&mut notes, "camera.height", &self.camera.height, &v);
            self.camera.height = v;
        }
        if let Some(v) = flags.n_rays {
            note(&mut notes, "n_rays", &self.n_rays, &v);
            self.n_rays = v;
        }
        if let Some(v) = flags.n_theta {
            note(&mut notes, "n_theta", &self.n_theta, &v);
            self.n_theta = v;
        }
        if let Some(v) = flags.grid_res {
            note(&mut notes, "grid_resolution", &self.grid_resolution, &Some(v));
            self.grid_resolution = Some(v);
        }
        if let Some((x, y, p)) = flags.sigma {
            note(&mut notes, "sigma", &self.sigma, &[x, y, p]);
            self.sigma = [x, y, p];
        }
        if let Some(v) = flags.obs_interval {
            note(&mut notes, "obs_interval", &self.obs_interval, &v);
            self.obs_interval = v;
        }
        if let Some(s) = &flags.uncertainty {
            let v = parse_uncertainty(s)?;
            note(&mut notes, "uncertainty", &self.uncertainty, &v);
            self.uncertainty = v;
        }
        if let Some(dir) = &flags.out_dir {
            note(&mut notes, "output_dir", &self.output_dir, &Some(dir.clone()));
            self.output_dir = Some(dir.clone());
        }
        if flags.heatmaps {
            note(&mut notes, "heatmaps", &self.heatmaps, &true);
            self.heatmaps = true;
        }
        Ok(notes)
    }

    fn apply_observer(&mut self, flags: &NoiseArgs, notes: &mut Vec<OverrideNote>) -> Result<(), CliError> {
        let kind = flags.observer.as_deref().or(if flags.observations.is_some() {
            Some("file")
        } else {
            None
        });
        if let Some(kind) = kind {
            let current = match self.observer {
                RunObserver::Gt { .. } => "gt",
                RunObserver::Noisy { .. } => "noisy",
                RunObserver::File => "file",
            };
            if kind != current {
                let new = match kind {
                    "gt" => default_observer(),
                    "noisy" => RunObserver::Noisy {
                        noise: default_noise(),
                    },
                    _ => RunObserver::File,
                };
                note(notes, "observer", &self.observer, &new);
                self.observer = new;
            }
        }
        match &mut self.observer {
            RunObserver::Gt { scale } => {
                if let Some(v) = flags.gt_scale {
                    note(notes, "observer.scale", scale, &v);
                    *scale = v;
                }
            }
            RunObserver::Noisy { noise } => apply_noise_flags(noise, flags, notes),
            RunObserver::File => {
                if let Some(p) = &flags.observations {
                    note(notes, "observations", &self.observations, &Some(p.clone()));
                    self.observations = Some(p.clone());
                }
            }
        }
        let observer = self.observer;
        if flags.gt_scale.is_some() && !matches!(observer, RunObserver::Gt { .. }) {
            return Err(CliError::Usage("--gt-scale needs the gt observer".into()));
        }
        if has_noise_flags(flags) && !matches!(observer, RunObserver::Noisy { .. }) {
            return Err(CliError::Usage("noise flags need the noisy observer".into()));
        }
        if flags.observations.is_some() && !matches!(observer, RunObserver::File) {
            return Err(CliError::Usage("--observations needs the file observer".into()));
        }
        Ok(())
    }

    /// Checks every key; the error names the first offending one.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.map {
            None => return Err(CliError::Usage("no map: pass --map or set `map` in the config".into())),
            Some(RunMap::Generated { extent_m, resolution, .. }) => {
                if !(*extent_m > 0.0 && extent_m.is_finite()) {
                    return Err(usage("map.extent_m", "must be positive"));
                }
                if !(*resolution > 0.0 && resolution.is_finite()) {
                    return Err(usage("map.resolution", "must be positive"));
                }
            }
            Some(RunMap::File { meta: Some(m), .. }) if !(m.resolution > 0.0 && m.resolution.is_finite()) => {
                return Err(usage("map.meta.resolution", "must be positive"));
            }
            Some(RunMap::File { .. }) => {}
        }
        if let RunTrajectory::Generated {
            length,
            step_mean,
            motion_noise,
            heading_quantum_deg,
            ..
        } = &self.trajectory
        {
            if *length == 0 {
                return Err(usage("trajectory.length", "must be at least 1"));
            }
            if !(*step_mean > 0.0 && step_mean.is_finite()) {
                return Err(usage("trajectory.step_mean", "must be positive"));
            }
            if motion_noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(usage("trajectory.motion_noise", "must be non-negative"));
            }
            if !(0.0..180.0).contains(heading_quantum_deg) {
                return Err(usage("trajectory.heading_quantum_deg", "must lie in [0, 180)"));
            }
        }
        if self.n_rays == 0 {
            return Err(usage("n_rays", "must be at least 1"));
        }
        if self.n_theta == 0 {
            return Err(usage("n_theta", "must be at least 1"));
        }
        if let Some(r) = self.grid_resolution {
            if !(r > 0.0 && r.is_finite()) {
                return Err(usage("grid_resolution", "must be positive"));
            }
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(usage("sigma", "must be non-negative"));
        }
        if !(self.max_range > 0.0) {
            return Err(usage("max_range", "must be positive"));
        }
        match self.observer {
            RunObserver::Gt { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(usage("observer.scale", "must be positive"));
            }
            RunObserver::Noisy { noise } => noise.validate().map_err(|e| usage("observer.noise", e))?,
            RunObserver::File if self.observations.is_none() => {
                return Err(usage("observations", "the file observer needs --observations"));
            }
            _ => {}
        }
        if let UncertaintySpec::Fixed { b0 } = self.uncertainty {
            if !(b0 > 0.0 && b0.is_finite()) {
                return Err(usage("uncertainty.b0", "must be positive"));
            }
        }
        if self.obs_interval == 0 {
            return Err(usage("obs_interval", "must be at least 1"));
        }
        if !(self.threshold_m > 0.0) {
            return Err(usage("threshold_m", "must be positive"));
        }
        if self.window == 0 {
            return Err(usage("window", "must be at least 1"));
        }
        if self.heatmaps && self.output_dir.is_none() {
            return Err(usage("heatmaps", "heatmaps need an output directory"));
        }
        Ok(())
    }
}
