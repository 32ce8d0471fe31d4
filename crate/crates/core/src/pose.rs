// SPDX-License-Identifier: Apache-2.0

//! Planar poses and angle arithmetic.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `[-π, π)`. Values already in range are returned unchanged.
pub fn normalize_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if r >= PI {
        r -= TAU;
    }
    r
}

/// Absolute angular difference in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// SE(2) pose: position in meters, heading in radians, always in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: normalize_angle(phi),
        }
    }

    /// Applies a relative motion expressed in this pose's body frame.
    pub fn compose(&self, dx: f64, dy: f64, dphi: f64) -> Pose2 {
        let (s, c) = self.phi.sin_cos();
        Pose2::new(
            self.x + c * dx - s * dy,
            self.y + s * dx + c * dy,
            self.phi + dphi,
        )
    }

    /// Relative motion `(dx, dy, dphi)` taking `self` to `other`, in `self`'s body frame.
    pub fn between(&self, other: &Pose2) -> (f64, f64, f64) {
        let (s, c) = self.phi.sin_cos();
        let wx = other.x - self.x;
        let wy = other.y - self.y;
        (
            c * wx + s * wy,
            -s * wx + c * wy,
            normalize_angle(other.phi - self.phi),
        )
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}
