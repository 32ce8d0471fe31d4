// SPDX-License-Identifier: Apache-2.0

//! Synthetic depth observers.
//!
//! Noise draws use ChaCha8 seeded with `rng_seed` through `seed_from_u64`, on
//! stream `frame`. Ray `j` reads two 64-bit words starting at word position
//! `4j`: the first decides corruption in i.i.d. mode, the second is the Laplace
//! draw. In sector mode one word at position `2⁴⁰` places the sector. A word
//! `w` maps to the uniform `((w >> 11) + 0.5) / 2⁵³` in `(0, 1)`, and a uniform
//! `u` to the Laplace error `−b·sgn(u − ½)·ln(1 − 2|u − ½|)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::floorplan::{floorplan_depth, OccupancyGrid, DEFAULT_MAX_RANGE};
use crate::gravity::CameraModel;
use crate::observation::{equiangular_rays, read_jsonl, DepthObservation, B_MIN};
use crate::pose::Pose2;

const SECTOR_WORD: u128 = 1 << 40;

/// Scale reported by the noise-free observer, in meters.
pub const DEFAULT_GT_SCALE: f64 = 0.1;

/// How the reported scale relates to the generating scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Calibration {
    /// The true generating scale.
    Oracle,
    /// A constant regardless of corruption.
    Fixed { b0: f64 },
    /// The true scale times `factor`.
    Miscalibrated { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    /// Each ray independently with probability `corrupt_prob`.
    Iid,
    /// One contiguous block of `round(corrupt_prob·R)` rays per frame.
    Sector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub base_scale: f64,
    pub corrupt_prob: f64,
    pub corrupt_scale: f64,
    pub calibration: Calibration,
    pub rng_seed: u64,
    #[serde(default = "default_mode")]
    pub corruption: CorruptionMode,
}

fn default_mode() -> CorruptionMode {
    CorruptionMode::Sector
}

/// One ray's generating scale and depth error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayDraw {
    pub scale: f64,
    pub error: f64,
    pub corrupted: bool,
}

fn uniform(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Laplace(0, b) by inverse CDF; scales at or below [`B_MIN`] give zero error.
pub fn laplace_from_uniform(u: f64, b: f64) -> f64 {
    if b <= B_MIN {
        return 0.0;
    }
    let c = u - 0.5;
    -b * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.base_scale >= B_MIN && self.base_scale.is_finite()) {
            return Err(SynthError::InvalidParams(format!("base_scale must be at least {B_MIN}")));
        }
        if !(self.corrupt_scale >= B_MIN && self.corrupt_scale.is_finite()) {
            return Err(SynthError::InvalidParams(format!("corrupt_scale must be at least {B_MIN}")));
        }
        if !(0.0..=1.0).contains(&self.corrupt_prob) {
            return Err(SynthError::InvalidParams("corrupt_prob must lie in [0, 1]".into()));
        }
        match self.calibration {
            Calibration::Fixed { b0 } if !(b0 > 0.0 && b0.is_finite()) => {
                Err(SynthError::InvalidParams("fixed calibration needs b0 > 0".into()))
            }
            Calibration::Miscalibrated { factor } if !(factor > 0.0 && factor.is_finite()) => {
                Err(SynthError::InvalidParams("miscalibration factor must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Scale reported for a ray generated with scale `b`.
    pub fn reported_scale(&self, b: f64) -> f64 {
        match self.calibration {
            Calibration::Oracle => b,
            Calibration::Fixed { b0 } => b0,
            Calibration::Miscalibrated { factor } => b * factor,
        }
    }

    /// Generating scales and errors for `n_rays` rays of one frame.
    pub fn draws(&self, frame: usize, n_rays: usize) -> Vec<RayDraw> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(frame as u64);
        let sector = match self.corruption {
            CorruptionMode::Iid => None,
            CorruptionMode::Sector => {
                let len = ((self.corrupt_prob * n_rays as f64).round() as usize).min(n_rays);
                rng.set_word_pos(SECTOR_WORD);
                let start = ((uniform(rng.next_u64()) * (n_rays - len + 1) as f64) as usize).min(n_rays - len);
                Some(start..start + len)
            }
        };
        (0..n_rays)
            .map(|j| {
                rng.set_word_pos(4 * j as u128);
                let c = uniform(rng.next_u64());
                let u = uniform(rng.next_u64());
                let corrupted = match &sector {
                    Some(r) => r.contains(&j),
                    None => c < self.corrupt_prob,
                };
                let scale = if corrupted { self.corrupt_scale } else { self.base_scale };
                RayDraw {
                    scale,
                    error: laplace_from_uniform(u, scale),
                    corrupted,
                }
            })
            .collect()
    }
}

fn true_depths(
    grid: &OccupancyGrid,
    pose: &Pose2,
    angles: &[f64],
    max_range: f64,
) -> Result<Vec<Option<f64>>, SynthError> {
    Ok(floorplan_depth(grid, pose, angles, max_range)?)
}

/// Noisy observation of `pose` for frame `frame`. Rays that hit nothing within
/// `max_range` are invalid.
pub fn observe(
    grid: &OccupancyGrid,
    pose: &Pose2,
    camera: &CameraModel,
    n_rays: usize,
    noise: &NoiseModel,
    frame: usize,
) -> Result<DepthObservation, SynthError> {
    noise.validate()?;
    let angles = equiangular_rays(camera, n_rays);
    let truth = true_depths(grid, pose, &angles, DEFAULT_MAX_RANGE)?;
    let draws = noise.draws(frame, n_rays);
    let mut depths = Vec::with_capacity(n_rays);
    let mut scales = Vec::with_capacity(n_rays);
    let mut valid = Vec::with_capacity(n_rays);
    for (d, r) in truth.iter().zip(&draws) {
        depths.push(d.map_or(0.0, |d| d + r.error));
        scales.push(noise.reported_scale(r.scale));
        valid.push(d.is_some());
    }
    Ok(DepthObservation::new(angles, depths, scales, valid)?)
}

/// Source of per-frame observations for a known trajectory.
pub trait ObservationSource: Sync {
    /// Observation at `frame`, taken from the true `pose`; `None` when absent.
    fn observe(&self, frame: usize, pose: &Pose2) -> Result<Option<DepthObservation>, SynthError>;
}

/// Exact floorplan depths with a constant reported scale.
pub struct GtObserver<'a> {
    pub grid: &'a OccupancyGrid,
    pub camera: CameraModel,
    pub n_rays: usize,
    pub scale: f64,
}

impl ObservationSource for GtObserver<'_> {
    fn observe(&self, _frame: usize, pose: &Pose2) -> Result<Option<DepthObservation>, SynthError> {
        let angles = equiangular_rays(&self.camera, self.n_rays);
        let truth = true_depths(self.grid, pose, &angles, DEFAULT_MAX_RANGE)?;
        let valid = truth.iter().map(Option::is_some).collect();
        let depths = truth.iter().map(|d| d.unwrap_or(0.0)).collect();
        Ok(Some(DepthObservation::new(angles, depths, vec![self.scale; self.n_rays], valid)?))
    }
}

/// Floorplan depths corrupted by a [`NoiseModel`].
pub struct NoisyObserver<'a> {
    pub grid: &'a OccupancyGrid,
    pub camera: CameraModel,
    pub n_rays: usize,
    pub noise: NoiseModel,
}

impl ObservationSource for NoisyObserver<'_> {
    fn observe(&self, frame: usize, pose: &Pose2) -> Result<Option<DepthObservation>, SynthError> {
        observe(self.grid, pose, &self.camera, self.n_rays, &self.noise, frame).map(Some)
    }
}

/// Observations replayed from a JSONL file, keyed by frame.
pub struct FileObserver {
    frames: BTreeMap<usize, DepthObservation>,
}

impl FileObserver {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let file = std::fs::File::open(path).map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let frames = read_jsonl(std::io::BufReader::new(file))?;
        Ok(Self {
            frames: frames.into_iter().collect(),
        })
    }

    pub fn from_frames(frames: impl IntoIterator<Item = (usize, DepthObservation)>) -> Self {
        Self {
            frames: frames.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

impl ObservationSource for FileObserver {
    fn observe(&self, frame: usize, _pose: &Pose2) -> Result<Option<DepthObservation>, SynthError> {
        Ok(self.frames.get(&frame).cloned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{laplace_nll, ColumnPrediction};
    use crate::synth::{gen_floorplan, gen_trajectory, FloorplanStyle};

    fn noise(base: f64, p: f64, corrupt: f64, cal: Calibration, mode: CorruptionMode) -> NoiseModel {
        NoiseModel {
            base_scale: base,
            corrupt_prob: p,
            corrupt_scale: corrupt,
            calibration: cal,
            rng_seed: 42,
            corruption: mode,
        }
    }

    fn camera() -> CameraModel {
        CameraModel::from_fov(80f64.to_radians(), 64, 48).unwrap()
    }

    #[test]
    fn degenerate_noise_reproduces_floorplan_depth() {
        let g = gen_floorplan(3, 12.0, FloorplanStyle::Rooms, 0.1).unwrap();
        let pose = gen_trajectory(&g, 1, 1, 0.5, (0.0, 0.0, 0.0)).unwrap().poses[0];
        let n = noise(B_MIN, 0.0, 1.0, Calibration::Oracle, CorruptionMode::Iid);
        let o = observe(&g, &pose, &camera(), 40, &n, 3).unwrap();
        let truth = floorplan_depth(&g, &pose, &o.ray_angles, DEFAULT_MAX_RANGE).unwrap();
        for j in 0..40 {
            assert_eq!(o.valid[j], truth[j].is_some());
            if let Some(d) = truth[j] {
                assert_eq!(o.depths[j], d);
            }
            assert_eq!(o.scales[j], B_MIN);
        }
    }

    #[test]
    fn fixed_calibration_reports_constant() {
        let n = noise(0.1, 0.3, 2.0, Calibration::Fixed { b0: 0.3 }, CorruptionMode::Iid);
        let g = gen_floorplan(3, 12.0, FloorplanStyle::Rooms, 0.1).unwrap();
        let pose = gen_trajectory(&g, 2, 1, 0.5, (0.0, 0.0, 0.0)).unwrap().poses[0];
        let o = observe(&g, &pose, &camera(), 40, &n, 0).unwrap();
        assert!(o.scales.iter().all(|&b| b == 0.3));
    }

    #[test]
    fn clean_ray_mean_absolute_error_is_scale() {
        let n = noise(0.1, 0.0, 1.0, Calibration::Oracle, CorruptionMode::Iid);
        let mean: f64 = (0..100_000).map(|f| n.draws(f, 1)[0].error.abs()).sum::<f64>() / 1e5;
        assert!((mean / 0.1 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn draws_keyed_by_seed_frame_ray() {
        let n = noise(0.1, 0.3, 2.0, Calibration::Oracle, CorruptionMode::Iid);
        let a = n.draws(7, 10);
        let b = n.draws(7, 25);
        assert_eq!(a[..], b[..10]);
        assert_ne!(n.draws(8, 10), a);
        let other = NoiseModel { rng_seed: 43, ..n };
        assert_ne!(other.draws(7, 10), a);
    }

    #[test]
    fn corrupted_rays_carry_larger_scales() {
        for mode in [CorruptionMode::Iid, CorruptionMode::Sector] {
            let n = noise(0.1, 0.3, 2.0, Calibration::Oracle, mode);
            let mut seen = (0, 0);
            for f in 0..200 {
                for d in n.draws(f, 40) {
                    if d.corrupted {
                        assert!(d.scale > 0.1);
                        seen.0 += 1;
                    } else {
                        assert_eq!(d.scale, 0.1);
                        seen.1 += 1;
                    }
                }
            }
            let frac = seen.0 as f64 / (seen.0 + seen.1) as f64;
            assert!((frac - 0.3).abs() < 0.03, "{mode:?}: {frac}");
        }
    }

    #[test]
    fn sector_is_contiguous() {
        let n = noise(0.1, 0.3, 2.0, Calibration::Oracle, CorruptionMode::Sector);
        for f in 0..50 {
            let idx: Vec<usize> = n.draws(f, 40).iter().enumerate().filter(|(_, d)| d.corrupted).map(|(j, _)| j).collect();
            assert_eq!(idx.len(), 12);
            assert_eq!(idx[11] - idx[0], 11);
        }
    }

    #[test]
    fn oracle_calibration_minimizes_nll() {
        let cam = camera();
        let mut totals = [0.0; 3];
        for (k, cal) in [
            Calibration::Oracle,
            Calibration::Miscalibrated { factor: 0.25 },
            Calibration::Miscalibrated { factor: 4.0 },
        ]
        .into_iter()
        .enumerate()
        {
            let n = noise(0.1, 0.3, 2.0, cal, CorruptionMode::Iid);
            for f in 0..500 {
                let d = n.draws(f, 16);
                let pred = ColumnPrediction::new(
                    d.iter().map(|r| 3.0 + r.error).collect(),
                    d.iter().map(|r| n.reported_scale(r.scale)).collect(),
                    cam,
                )
                .unwrap();
                totals[k] += laplace_nll(&pred, &[3.0; 16]).unwrap();
            }
        }
        assert!(totals[0] < totals[1] && totals[0] < totals[2], "{totals:?}");
    }

    #[test]
    fn validation() {
        assert!(noise(0.001, 0.0, 1.0, Calibration::Oracle, CorruptionMode::Iid).validate().is_err());
        assert!(noise(0.1, 1.5, 1.0, Calibration::Oracle, CorruptionMode::Iid).validate().is_err());
        assert!(noise(0.1, 0.5, 1.0, Calibration::Fixed { b0: 0.0 }, CorruptionMode::Iid).validate().is_err());
        let json = r#"{"base_scale":0.1,"corrupt_prob":0.3,"corrupt_scale":2.0,"calibration":{"kind":"fixed","b0":0.5},"rng_seed":1}"#;
        let n: NoiseModel = serde_json::from_str(json).unwrap();
        assert_eq!(n.corruption, CorruptionMode::Sector);
        assert_eq!(n.calibration, Calibration::Fixed { b0: 0.5 });
    }

    #[test]
    fn file_observer_replays_frames() {
        let o = DepthObservation::new(vec![0.0], vec![1.0], vec![0.2], vec![true]).unwrap();
        let src = FileObserver::from_frames([(2, o.clone())]);
        assert_eq!(src.observe(2, &Pose2::new(0.0, 0.0, 0.0)).unwrap(), Some(o));
        assert_eq!(src.observe(0, &Pose2::new(0.0, 0.0, 0.0)).unwrap(), None);
    }
}
