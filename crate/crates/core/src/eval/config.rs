// SPDX-License-Identifier: Apache-2.0

//! Benchmark configuration: a JSON document with the schema below. Every key
//! except `maps` and `variants` has a default.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "gt-suite",
//!   "maps": {"kind": "generated", "style": "rooms", "extent_m": 30.0, "resolution": 0.1, "seeds": [1, 2]},
//!   "trajectories": {"per_map": 2, "step_mean": 0.5, "motion_noise": [0.1, 0.1, 0.05],
//!                    "heading_quantum_deg": 10.0, "seed_offset": 0},
//!   "camera": {"hfov_deg": 80.0, "width": 640, "height": 480},
//!   "n_rays": 40, "n_theta": 36, "grid_resolution": null, "sigma": [0.1, 0.1, 0.05],
//!   "max_range": 50.0, "obs_interval": 1,
//!   "variants": [
//!     {"name": "gt", "observer": {"kind": "gt", "scale": 0.1}},
//!     {"name": "fixed", "observer": {"kind": "noisy", "noise": {...}}, "uncertainty": {"kind": "pooled"}}
//!   ],
//!   "sequence_lengths": [100, 50, 35, 20, 15], "success_thresholds": [1.0], "window": 10,
//!   "recall_thresholds": [{"distance_m": 1.0, "heading_deg": 30.0}],
//!   "output_dir": null, "heatmaps": false
//! }
//! ```
//!
//! Map `m` (its seed, or its index for file maps) carries trajectories with
//! seeds `1000·m + k + seed_offset` for `k < per_map`. Each trajectory is
//! generated once with the longest sequence length; shorter lengths are its
//! prefixes. A noisy observer's `rng_seed` is mixed with the trajectory seed
//! per sequence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{default_recall_thresholds, EvalError, RecallThreshold};
use crate::filter::DEFAULT_SIGMA;
use crate::floorplan::DEFAULT_MAX_RANGE;
use crate::gravity::CameraModel;
use crate::synth::{FloorplanStyle, NoiseModel, DEFAULT_GT_SCALE, DEFAULT_STEP_MEAN};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub maps: MapSource,
    #[serde(default)]
    pub trajectories: TrajectorySpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default = "default_n_rays")]
    pub n_rays: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Filter grid resolution; maps are resampled when it differs from theirs.
    #[serde(default)]
    pub grid_resolution: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: [f64; 3],
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "one")]
    pub obs_interval: usize,
    pub variants: Vec<VariantSpec>,
    #[serde(default = "default_lengths")]
    pub sequence_lengths: Vec<usize>,
    #[serde(default = "default_thresholds")]
    pub success_thresholds: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_recall_thresholds")]
    pub recall_thresholds: Vec<RecallThreshold>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub heatmaps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSource {
    Generated {
        style: FloorplanStyle,
        extent_m: f64,
        resolution: f64,
        seeds: Vec<u64>,
    },
    /// json-grid files, or pgm files with a sidecar.
    Files { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub per_map: usize,
    pub step_mean: f64,
    pub motion_noise: [f64; 3],
    /// Turn lattice in degrees; 0 gives continuous headings.
    pub heading_quantum_deg: f64,
    pub seed_offset: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            per_map: 2,
            step_mean: DEFAULT_STEP_MEAN,
            motion_noise: default_sigma(),
            heading_quantum_deg: 10.0,
            seed_offset: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub hfov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            hfov_deg: 80.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraSpec {
    pub fn model(&self) -> Result<CameraModel, EvalError> {
        CameraModel::from_fov(self.hfov_deg.to_radians(), self.width, self.height)
            .map_err(|e| EvalError::config("camera", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    pub observer: ObserverSpec,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    /// Overrides the top-level `obs_interval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_interval: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObserverSpec {
    /// Exact floorplan depths reporting a constant scale.
    Gt {
        #[serde(default = "default_gt_scale")]
        scale: f64,
    },
    Noisy { noise: NoiseModel },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintySpec {
    /// Each ray's reported scale.
    #[default]
    PerRay,
    /// One constant scale.
    Fixed { b0: f64 },
    /// One constant scale equal to the mean reported scale of the variant's
    /// valid rays, pooled over every sequence of the run.
    Pooled,
}

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid_resolution: Option<f64>,
    pub obs_interval: Option<usize>,
    pub n_theta: Option<usize>,
    pub sequence_lengths: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
    pub heatmaps: Option<bool>,
}

/// One replaced key with its configured and effective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideNote {
    pub key: String,
    pub config: serde_json::Value,
    pub flag: serde_json::Value,
}

fn note<T: Serialize>(notes: &mut Vec<OverrideNote>, key: &str, config: &T, flag: &T) {
    notes.push(OverrideNote {
        key: key.to_string(),
        config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        flag: serde_json::to_value(flag).unwrap_or(serde_json::Value::Null),
    });
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    fn parse(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            EvalError::config(key_in_message(&msg).unwrap_or("<document>"), msg.clone())
        })
    }

    /// Reads a file; relative map paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        if let MapSource::Files { paths } = &mut config.maps {
            let base = path.parent().unwrap_or(Path::new(""));
            for p in paths.iter_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies flag values; each one that is set is recorded, flags win.
    pub fn apply(&mut self, o: &Overrides) -> Vec<OverrideNote> {
        let mut notes = Vec::new();
        if let Some(r) = o.grid_resolution {
            note(&mut notes, "grid_resolution", &self.grid_resolution, &Some(r));
            self.grid_resolution = Some(r);
        }
        if let Some(dt) = o.obs_interval {
            note(&mut notes, "obs_interval", &self.obs_interval, &dt);
            self.obs_interval = dt;
            for (k, v) in self.variants.iter_mut().enumerate() {
                if let Some(own) = v.obs_interval.take() {
                    note(&mut notes, &format!("variants[{k}].obs_interval"), &own, &dt);
                }
            }
        }
        if let Some(n) = o.n_theta {
            note(&mut notes, "n_theta", &self.n_theta, &n);
            self.n_theta = n;
        }
        if let Some(ls) = &o.sequence_lengths {
            note(&mut notes, "sequence_lengths", &self.sequence_lengths, ls);
            self.sequence_lengths = ls.clone();
        }
        // not recorded: the location does not affect results
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if let Some(h) = o.heatmaps {
            note(&mut notes, "heatmaps", &self.heatmaps, &h);
            self.heatmaps = h;
        }
        notes
    }

    /// Checks every key; the error names the first offending one.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EvalError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        match &self.maps {
            MapSource::Generated {
                extent_m, resolution, ..
            } => {
                if !(extent_m.is_finite() && *extent_m >= 2.0) {
                    return Err(EvalError::config("maps.extent_m", "must be at least 2"));
                }
                if !(resolution.is_finite() && *resolution > 0.0 && *resolution <= extent_m / 8.0) {
                    return Err(EvalError::config("maps.resolution", "must lie in (0, extent_m / 8]"));
                }
            }
            MapSource::Files { paths } => {
                for (k, p) in paths.iter().enumerate() {
                    if !p.is_file() {
                        return Err(EvalError::config(
                            &format!("maps.paths[{k}]"),
                            format!("no such file: {}", p.display()),
                        ));
                    }
                }
            }
        }
        let t = &self.trajectories;
        if !(t.step_mean.is_finite() && t.step_mean > 0.0) {
            return Err(EvalError::config("trajectories.step_mean", "must be positive"));
        }
        if !t.motion_noise.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(EvalError::config("trajectories.motion_noise", "must be non-negative"));
        }
        if !(t.heading_quantum_deg >= 0.0 && t.heading_quantum_deg < 180.0) {
            return Err(EvalError::config("trajectories.heading_quantum_deg", "must lie in [0, 180)"));
        }
        self.camera.model()?;
        if self.n_rays == 0 {
            return Err(EvalError::config("n_rays", "must be at least 1"));
        }
        if self.n_theta < 4 {
            return Err(EvalError::config("n_theta", "must be at least 4"));
        }
        if let Some(r) = self.grid_resolution {
            if !(r.is_finite() && r > 0.0) {
                return Err(EvalError::config("grid_resolution", "must be positive"));
            }
        }
        if !self.sigma.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(EvalError::config("sigma", "must be non-negative"));
        }
        if !(self.max_range > 0.0) {
            return Err(EvalError::config("max_range", "must be positive"));
        }
        if self.obs_interval == 0 {
            return Err(EvalError::config("obs_interval", "must be at least 1"));
        }
        for (k, v) in self.variants.iter().enumerate() {
            let key = |field: &str| format!("variants[{k}].{field}");
            let safe = !v.name.is_empty()
                && v.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
            if !safe {
                return Err(EvalError::config(&key("name"), "must be non-empty ASCII letters, digits, '-', '_' or '.'"));
            }
            if self.variants[..k].iter().any(|o| o.name == v.name) {
                return Err(EvalError::config(&key("name"), format!("duplicate variant {}", v.name)));
            }
            match v.observer {
                ObserverSpec::Gt { scale } if !(scale > 0.0 && scale.is_finite()) => {
                    return Err(EvalError::config(&key("observer.scale"), "must be positive"));
                }
                ObserverSpec::Noisy { noise } => {
                    noise.validate().map_err(|e| EvalError::config(&key("observer.noise"), e.to_string()))?;
                }
                _ => {}
            }
            if let UncertaintySpec::Fixed { b0 } = v.uncertainty {
                if !(b0 > 0.0 && b0.is_finite()) {
                    return Err(EvalError::config(&key("uncertainty.b0"), "must be positive"));
                }
            }
            if v.obs_interval == Some(0) {
                return Err(EvalError::config(&key("obs_interval"), "must be at least 1"));
            }
        }
        if self.window == 0 {
            return Err(EvalError::config("window", "must be at least 1"));
        }
        if self.sequence_lengths.is_empty() {
            return Err(EvalError::config("sequence_lengths", "must not be empty"));
        }
        for (k, &t) in self.sequence_lengths.iter().enumerate() {
            if t < self.window {
                return Err(EvalError::config(
                    &format!("sequence_lengths[{k}]"),
                    format!("length {t} is shorter than the window {}", self.window),
                ));
            }
        }
        if self.success_thresholds.is_empty() || !self.success_thresholds.iter().all(|t| t.is_finite() && *t > 0.0) {
            return Err(EvalError::config("success_thresholds", "must be a non-empty list of positive distances"));
        }
        for (k, r) in self.recall_thresholds.iter().enumerate() {
            let heading_ok = r.heading_deg.map_or(true, |a| a > 0.0 && a <= 180.0);
            if !(r.distance_m.is_finite() && r.distance_m > 0.0 && heading_ok) {
                return Err(EvalError::config(
                    &format!("recall_thresholds[{k}]"),
                    "distance must be positive and heading in (0, 180]",
                ));
            }
        }
        Ok(())
    }

    /// Longest sequence length; trajectories are generated with it.
    pub fn max_length(&self) -> usize {
        self.sequence_lengths.iter().copied().max().unwrap_or(0)
    }

    /// Sequence lengths in decreasing order without duplicates.
    pub fn lengths_desc(&self) -> Vec<usize> {
        let mut ls = self.sequence_lengths.clone();
        ls.sort_unstable_by(|a, b| b.cmp(a));
        ls.dedup();
        ls
    }

    pub fn variant_interval(&self, v: &VariantSpec) -> usize {
        v.obs_interval.unwrap_or(self.obs_interval)
    }
}

/// The first backquoted name in a serde message, e.g. "unknown field `maps`".
fn key_in_message(msg: &str) -> Option<&str> {
    let start = msg.find("field `")? + "field `".len();
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_name() -> String {
    "bench".into()
}

fn default_n_rays() -> usize {
    40
}

fn default_n_theta() -> usize {
    36
}

fn default_sigma() -> [f64; 3] {
    [DEFAULT_SIGMA.0, DEFAULT_SIGMA.1, DEFAULT_SIGMA.2]
}

fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE
}

fn one() -> usize {
    1
}

fn default_lengths() -> Vec<usize> {
    vec![100, 50, 35, 20, 15]
}

fn default_thresholds() -> Vec<f64> {
    vec![1.0]
}

fn default_window() -> usize {
    10
}

fn default_gt_scale() -> f64 {
    DEFAULT_GT_SCALE
}
