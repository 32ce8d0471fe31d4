// SPDX-License-Identifier: Apache-2.0

//! Gravity-alignment geometry: the camera-to-gravity rotation, the warp homography
//! and the validity mask of the warped image.
//!
//! Conventions. Pixel coordinates have `u` to the right and `v` down; the camera
//! frame has x right, y down, z forward (optical axis). Roll `ψ` rotates about the
//! forward axis and pitch `θ` about the lateral axis:
//!
//! ```text
//! roll(ψ)  = [ cosψ  -sinψ  0 ]      pitch(θ) = [ 1    0      0    ]
//!            [ sinψ   cosψ  0 ]                 [ 0  cosθ  -sinθ  ]
//!            [ 0      0     1 ]                 [ 0  sinθ   cosθ  ]
//! ```
//!
//! `R_cg = pitch(θ) · roll(ψ)` maps gravity-aligned directions into the camera frame,
//! `R_gc = R_cgᵀ`, and `H = K · R_gc · K⁻¹` warps source pixels into the aligned frame.
//! The same intrinsics `K` are used on both sides.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::pgm;

#[derive(Debug, Error, PartialEq)]
pub enum GravityError {
    #[error("tilt too large for a homography: roll {psi} rad, pitch {theta} rad (need |angle| < π/2)")]
    DegenerateTilt { psi: f64, theta: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Pinhole intrinsics and image size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GravityError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera with the principal point at the image center and the given horizontal FoV.
    pub fn from_fov(hfov: f64, width: usize, height: usize) -> Result<Self, GravityError> {
        if !(hfov > 0.0 && hfov < std::f64::consts::PI) {
            return Err(GravityError::InvalidCamera(format!("horizontal FoV {hfov} outside (0, π)")));
        }
        let f = width as f64 / (2.0 * (hfov / 2.0).tan());
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GravityError> {
        if self.width == 0 || self.height == 0 {
            return Err(GravityError::InvalidCamera("image size must be at least 1x1".into()));
        }
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(GravityError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(GravityError::InvalidCamera("principal point must be finite".into()));
        }
        Ok(())
    }

    /// `2·atan(width / (2·fx))`.
    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn intrinsics_inverse(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Rotation about the forward (optical) axis.
pub fn roll_rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about the lateral axis.
pub fn pitch_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// `R_cg = pitch(θ) · roll(ψ)`.
pub fn rotation_cg(psi: f64, theta: f64) -> Matrix3<f64> {
    pitch_rotation(theta) * roll_rotation(psi)
}

#[derive(Debug, Clone)]
pub struct GravityAlignment {
    pub roll_psi: f64,
    pub pitch_theta: f64,
    /// Source pixels → aligned pixels.
    pub homography: Matrix3<f64>,
    /// Aligned pixels → source pixels.
    pub homography_inverse: Matrix3<f64>,
    pub width: usize,
    pub height: usize,
    /// Row-major, `height × width`, row 0 at the top. `true` where the aligned pixel
    /// has a source pixel.
    pub mask: Vec<bool>,
}

impl GravityAlignment {
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.mask[v * self.width + u]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Mask as P2 with 255 for valid and 0 for invalid pixels.
    pub fn mask_pgm(&self) -> String {
        let px: Vec<u16> = self.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        pgm::encode_p2(self.width, self.height, 255, &px)
    }
}

/// Applies a homography to a pixel position, `None` when it lands at or behind infinity.
pub fn apply_homography(h: &Matrix3<f64>, u: f64, v: f64) -> Option<(f64, f64)> {
    let p = h * Vector3::new(u, v, 1.0);
    if p.z <= 0.0 || !p.z.is_finite() {
        return None;
    }
    Some((p.x / p.z, p.y / p.z))
}

pub fn alignment_homography(
    camera: &CameraModel,
    psi: f64,
    theta: f64,
) -> Result<GravityAlignment, GravityError> {
    camera.validate()?;
    let limit = std::f64::consts::FRAC_PI_2;
    if !(psi.abs() < limit && theta.abs() < limit) {
        return Err(GravityError::DegenerateTilt { psi, theta });
    }
    let k = camera.intrinsics();
    let k_inv = camera.intrinsics_inverse();
    let r_cg = rotation_cg(psi, theta);
    // K·R·K⁻¹ written as I + K·(R − I)·K⁻¹ so that zero tilt yields exactly I
    let eye = Matrix3::identity();
    let homography = eye + k * (r_cg.transpose() - eye) * k_inv;
    let homography_inverse = eye + k * (r_cg - eye) * k_inv;

    let (w, h) = (camera.width, camera.height);
    let mut mask = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let valid = apply_homography(&homography_inverse, u as f64 + 0.5, v as f64 + 0.5)
                .is_some_and(|(x, y)| x >= 0.0 && x < w as f64 && y >= 0.0 && y < h as f64);
            mask.push(valid);
        }
    }
    Ok(GravityAlignment {
        roll_psi: psi,
        pitch_theta: theta,
        homography,
        homography_inverse,
        width: w,
        height: h,
        mask,
    })
}
