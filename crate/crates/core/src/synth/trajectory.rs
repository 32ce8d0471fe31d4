// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::filter::MotionInput;
use crate::floorplan::OccupancyGrid;
use crate::pose::{normalize_angle, Pose2};

/// Minimum distance kept from occupied cells, in meters.
pub const CLEARANCE: f64 = 0.3;
/// Default mean step length in meters.
pub const DEFAULT_STEP_MEAN: f64 = 0.5;

/// Default heading lattice: turns are multiples of 10°, starting from −π.
pub const DEFAULT_HEADING_QUANTUM: f64 = std::f64::consts::TAU / 36.0;

const TURN_STD: f64 = 0.35;
const HEADING_RETRIES: usize = 40;
const RESTARTS: usize = 20;

/// Ground-truth poses with measured relative motions; `motions[i]` leads from
/// `poses[i]` to `poses[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose2>,
    pub motions: Vec<MotionInput>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// One motion per frame, with an identity motion leading into frame 0.
    pub fn frame_motions(&self) -> Vec<MotionInput> {
        std::iter::once(MotionInput::identity()).chain(self.motions.iter().copied()).collect()
    }

    /// The first `t` frames.
    pub fn prefix(&self, t: usize) -> Trajectory {
        let t = t.min(self.poses.len());
        Trajectory {
            poses: self.poses[..t].to_vec(),
            motions: self.motions[..t.saturating_sub(1)].to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SynthError::Format(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Trajectory, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let t: Trajectory = serde_json::from_str(&text).map_err(|e| SynthError::Format(format!("{}: {e}", path.display())))?;
        if t.motions.len() + 1 != t.poses.len() && !(t.poses.is_empty() && t.motions.is_empty()) {
            return Err(SynthError::Format(format!(
                "{}: {} poses need {} motions, found {}",
                path.display(),
                t.poses.len(),
                t.poses.len().saturating_sub(1),
                t.motions.len()
            )));
        }
        Ok(t)
    }
}

/// True when the point and a ring of samples at [`CLEARANCE`] lie in free cells.
pub fn has_clearance(grid: &OccupancyGrid, x: f64, y: f64) -> bool {
    if !grid.is_free_at(x, y) {
        return false;
    }
    for r in [CLEARANCE / 2.0, CLEARANCE] {
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            if !grid.is_free_at(x + r * a.cos(), y + r * a.sin()) {
                return false;
            }
        }
    }
    true
}

fn segment_clear(grid: &OccupancyGrid, from: &Pose2, to: &Pose2) -> bool {
    let len = from.distance(to);
    let steps = ((len / (0.5 * grid.resolution())).ceil() as usize).max(1);
    (1..=steps).all(|s| {
        let f = s as f64 / steps as f64;
        has_clearance(grid, from.x + f * (to.x - from.x), from.y + f * (to.y - from.y))
    })
}

/// Random walk with heading persistence on the [`DEFAULT_HEADING_QUANTUM`] lattice.
pub fn gen_trajectory(
    grid: &OccupancyGrid,
    seed: u64,
    length: usize,
    step_mean: f64,
    motion_noise: (f64, f64, f64),
) -> Result<Trajectory, SynthError> {
    gen_trajectory_with(grid, seed, length, step_mean, motion_noise, DEFAULT_HEADING_QUANTUM)
}

/// Random walk with heading persistence through free space.
///
/// Step lengths are uniform in `[0.5, 1.5]·step_mean`; each step turns by a
/// normal draw and then moves forward. With `heading_quantum > 0` true headings
/// are `−π + m·quantum` for integer `m`, as for an agent with discrete turn
/// actions; `0` gives continuous headings. Measured motions add independent
/// normal noise with std `motion_noise` to the true relative motion and carry
/// that std as their `sigma`.
pub fn gen_trajectory_with(
    grid: &OccupancyGrid,
    seed: u64,
    length: usize,
    step_mean: f64,
    motion_noise: (f64, f64, f64),
    heading_quantum: f64,
) -> Result<Trajectory, SynthError> {
    if !(heading_quantum >= 0.0 && heading_quantum < std::f64::consts::PI) {
        return Err(SynthError::InvalidParams(format!("heading quantum must lie in [0, π), got {heading_quantum}")));
    }
    let snap = |phi: f64| {
        if heading_quantum > 0.0 {
            let m = ((phi + std::f64::consts::PI) / heading_quantum).round();
            normalize_angle(m * heading_quantum - std::f64::consts::PI)
        } else {
            normalize_angle(phi)
        }
    };
    if length == 0 {
        return Err(SynthError::InvalidParams("trajectory length must be at least 1".into()));
    }
    if !(step_mean > 0.0 && step_mean.is_finite()) {
        return Err(SynthError::InvalidParams(format!("step_mean must be positive, got {step_mean}")));
    }
    let sigmas = [motion_noise.0, motion_noise.1, motion_noise.2];
    if !sigmas.iter().all(|s| s.is_finite() && *s >= 0.0) {
        return Err(SynthError::InvalidParams("motion noise must be non-negative".into()));
    }
    let candidates: Vec<(usize, usize)> = (0..grid.height())
        .flat_map(|j| (0..grid.width()).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            let (x, y) = grid.cell_center(i, j);
            has_clearance(grid, x, y)
        })
        .collect();
    if candidates.is_empty() {
        return Err(SynthError::StuckTrajectory(format!("no free cell with {CLEARANCE} m clearance")));
    }

    let mut path_rng = ChaCha8Rng::seed_from_u64(seed);
    let turn = Normal::new(0.0, TURN_STD).expect("finite std");
    let mut poses = Vec::new();
    'attempt: for _ in 0..RESTARTS {
        let (ci, cj) = candidates[path_rng.gen_range(0..candidates.len())];
        let (x, y) = grid.cell_center(ci, cj);
        let res = grid.resolution();
        let start = Pose2::new(
            x + path_rng.gen_range(-0.5..0.5) * res,
            y + path_rng.gen_range(-0.5..0.5) * res,
            snap(path_rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
        );
        if !has_clearance(grid, start.x, start.y) {
            continue;
        }
        poses.clear();
        poses.push(start);
        while poses.len() < length {
            let cur = *poses.last().expect("non-empty");
            let mut next = None;
            for attempt in 0..HEADING_RETRIES {
                let phi = snap(if attempt == 0 {
                    cur.phi + turn.sample(&mut path_rng)
                } else {
                    path_rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
                });
                let step = step_mean * path_rng.gen_range(0.5..1.5);
                let cand = Pose2::new(cur.x + step * phi.cos(), cur.y + step * phi.sin(), phi);
                if segment_clear(grid, &cur, &cand) {
                    next = Some(cand);
                    break;
                }
            }
            match next {
                Some(p) => poses.push(p),
                None => continue 'attempt,
            }
        }
        break;
    }
    if poses.len() != length {
        return Err(SynthError::StuckTrajectory(format!(
            "could not place {length} collision-free poses after {RESTARTS} attempts"
        )));
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let mut draw = |s: f64| {
        if s > 0.0 {
            Normal::new(0.0, s).expect("finite std").sample(&mut noise_rng)
        } else {
            0.0
        }
    };
    let motions = poses
        .windows(2)
        .map(|w| {
            let (dx, dy, dphi) = w[0].between(&w[1]);
            let t = (dx + draw(sigmas[0]), dy + draw(sigmas[1]), normalize_angle(dphi + draw(sigmas[2])));
            MotionInput::new(t, motion_noise).expect("validated noise")
        })
        .collect();
    Ok(Trajectory { poses, motions })
}
