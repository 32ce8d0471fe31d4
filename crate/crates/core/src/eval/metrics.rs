// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::pose::{angle_distance, Pose2};

/// Euclidean position error per frame.
pub fn position_errors(est: &[Pose2], gt: &[Pose2]) -> Result<Vec<f64>, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            est: est.len(),
            gt: gt.len(),
        });
    }
    Ok(est.iter().zip(gt).map(|(e, g)| e.distance(g)).collect())
}

fn last_window(errors: &[f64], window: usize) -> Result<&[f64], EvalError> {
    if window == 0 || errors.len() < window {
        return Err(EvalError::TooShort {
            len: errors.len(),
            window,
        });
    }
    Ok(&errors[errors.len() - window..])
}

/// True when every one of the last `window` position errors is at most `threshold_m`.
pub fn sequence_success(est: &[Pose2], gt: &[Pose2], threshold_m: f64, window: usize) -> Result<bool, EvalError> {
    let errors = position_errors(est, gt)?;
    success_of(&errors, threshold_m, window)
}

/// Root-mean-square position error over the last `window` frames.
pub fn rmse_window(est: &[Pose2], gt: &[Pose2], window: usize) -> Result<f64, EvalError> {
    let errors = position_errors(est, gt)?;
    rmse_of(&errors, window)
}

pub(crate) fn success_of(errors: &[f64], threshold_m: f64, window: usize) -> Result<bool, EvalError> {
    Ok(last_window(errors, window)?.iter().all(|&e| e <= threshold_m))
}

pub(crate) fn rmse_of(errors: &[f64], window: usize) -> Result<f64, EvalError> {
    let w = last_window(errors, window)?;
    Ok((w.iter().map(|e| e * e).sum::<f64>() / w.len() as f64).sqrt())
}

/// Estimated and true poses of one sequence with its summary metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub est_poses: Vec<Pose2>,
    pub gt_poses: Vec<Pose2>,
    pub per_frame_error: Vec<f64>,
    pub threshold_m: f64,
    pub window: usize,
    pub success: bool,
    pub rmse_window: f64,
}

impl SequenceResult {
    pub fn new(est_poses: Vec<Pose2>, gt_poses: Vec<Pose2>, threshold_m: f64, window: usize) -> Result<Self, EvalError> {
        let per_frame_error = position_errors(&est_poses, &gt_poses)?;
        let success = success_of(&per_frame_error, threshold_m, window)?;
        let rmse_window = rmse_of(&per_frame_error, window)?;
        Ok(Self {
            est_poses,
            gt_poses,
            per_frame_error,
            threshold_m,
            window,
            success,
            rmse_window,
        })
    }
}

/// Distance threshold with an optional joint heading threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallThreshold {
    pub distance_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<f64>,
}

impl RecallThreshold {
    pub fn distance(distance_m: f64) -> Self {
        Self {
            distance_m,
            heading_deg: None,
        }
    }

    pub fn joint(distance_m: f64, heading_deg: f64) -> Self {
        Self {
            distance_m,
            heading_deg: Some(heading_deg),
        }
    }

    pub fn accepts(&self, est: &Pose2, gt: &Pose2) -> bool {
        est.distance(gt) <= self.distance_m
            && self
                .heading_deg
                .map_or(true, |a| angle_distance(est.phi, gt.phi) <= a.to_radians())
    }
}

impl std::fmt::Display for RecallThreshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}m", self.distance_m)?;
        if let Some(a) = self.heading_deg {
            write!(f, " {a}°")?;
        }
        Ok(())
    }
}

/// Thresholds of the single-frame recall table: 0.1, 0.5, 1, 1 m 30°, 2, 5 and 10 m.
pub fn default_recall_thresholds() -> Vec<RecallThreshold> {
    vec![
        RecallThreshold::distance(0.1),
        RecallThreshold::distance(0.5),
        RecallThreshold::distance(1.0),
        RecallThreshold::joint(1.0, 30.0),
        RecallThreshold::distance(2.0),
        RecallThreshold::distance(5.0),
        RecallThreshold::distance(10.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallEntry {
    pub threshold: RecallThreshold,
    /// Fraction of accepted results in `[0, 1]`.
    pub recall: f64,
}

/// Fraction of `(estimate, truth)` pairs accepted by each threshold. An empty
/// batch gives an empty table.
pub fn single_frame_recall(results: &[(Pose2, Pose2)], thresholds: &[RecallThreshold]) -> Vec<RecallEntry> {
    if results.is_empty() {
        return Vec::new();
    }
    thresholds
        .iter()
        .map(|t| {
            let hits = results.iter().filter(|(e, g)| t.accepts(e, g)).count();
            RecallEntry {
                threshold: *t,
                recall: hits as f64 / results.len() as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn along_x(errors: &[f64]) -> (Vec<Pose2>, Vec<Pose2>) {
        let gt: Vec<Pose2> = (0..errors.len()).map(|k| Pose2::new(k as f64, 1.0, 0.3)).collect();
        let est = gt.iter().zip(errors).map(|(g, e)| Pose2::new(g.x + e, g.y, g.phi)).collect();
        (est, gt)
    }

    #[test]
    fn exact_estimates() {
        let (est, gt) = along_x(&[0.0; 12]);
        for t in [1e-9, 0.5, 1.0] {
            assert!(sequence_success(&est, &gt, t, 10).unwrap());
        }
        assert_eq!(rmse_window(&est, &gt, 10).unwrap(), 0.0);
    }

    #[test]
    fn success_is_inclusive_and_strict_beyond() {
        let (est, gt) = along_x(&[0.0, 0.0, 1.0, 0.2]);
        assert!(sequence_success(&est, &gt, 1.0, 3).unwrap());
        let (est, gt) = along_x(&[0.0, 0.0, 1.0 + 1e-12, 0.2]);
        assert!(!sequence_success(&est, &gt, 1.0, 3).unwrap());
    }

    #[test]
    fn only_the_window_matters() {
        let mut errors = vec![2.0; 10];
        errors.extend([0.5; 10]);
        let (est, gt) = along_x(&errors);
        assert!(sequence_success(&est, &gt, 1.0, 10).unwrap());
        assert!(!sequence_success(&est, &gt, 1.0, 11).unwrap());
    }

    #[test]
    fn rmse_values() {
        let (est, gt) = along_x(&[9.0, 3.0, 4.0]);
        assert!((rmse_window(&est, &gt, 2).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        let (est, gt) = along_x(&[0.25; 10]);
        assert!((rmse_window(&est, &gt, 10).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn short_or_mismatched_inputs() {
        let (est, gt) = along_x(&[0.0; 5]);
        assert!(matches!(sequence_success(&est, &gt, 1.0, 10), Err(EvalError::TooShort { len: 5, window: 10 })));
        assert!(matches!(rmse_window(&est, &gt, 6), Err(EvalError::TooShort { .. })));
        assert!(matches!(rmse_window(&est, &gt, 0), Err(EvalError::TooShort { .. })));
        assert!(matches!(rmse_window(&est[..4], &gt, 2), Err(EvalError::LengthMismatch { est: 4, gt: 5 })));
    }

    #[test]
    fn sequence_result_summary() {
        let (est, gt) = along_x(&[5.0, 3.0, 4.0]);
        let r = SequenceResult::new(est, gt, 4.0, 2).unwrap();
        assert!(r.success);
        assert_eq!(r.per_frame_error.len(), 3);
        assert!((r.rmse_window - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn recall_all_exact() {
        let p = Pose2::new(1.0, 2.0, 3.0);
        let table = single_frame_recall(&[(p, p), (p, p)], &default_recall_thresholds());
        assert_eq!(table.len(), 7);
        assert!(table.iter().all(|e| e.recall == 1.0));
        assert!(single_frame_recall(&[], &default_recall_thresholds()).is_empty());
    }

    #[test]
    fn joint_threshold_needs_heading() {
        let gt = Pose2::new(0.0, 0.0, 0.0);
        let est = Pose2::new(0.7, 0.0, 45f64.to_radians());
        assert!(RecallThreshold::distance(1.0).accepts(&est, &gt));
        assert!(!RecallThreshold::joint(1.0, 30.0).accepts(&est, &gt));
        // heading error wraps across ±π
        let a = Pose2::new(0.0, 0.0, 3.1);
        let b = Pose2::new(0.0, 0.0, -3.1);
        assert!(RecallThreshold::joint(1.0, 5.0).accepts(&a, &b));
    }

    #[test]
    fn recall_hand_counted() {
        let gt = Pose2::new(0.0, 0.0, 0.0);
        let cases = [
            (Pose2::new(0.05, 0.0, 0.0), gt),
            (Pose2::new(0.45, 0.0, 40f64.to_radians()), gt),
            (Pose2::new(1.5, 0.0, 0.0), gt),
            (Pose2::new(6.0, 8.0, 1.0), gt),
        ];
        let table = single_frame_recall(&cases, &default_recall_thresholds());
        let recalls: Vec<f64> = table.iter().map(|e| e.recall).collect();
        assert_eq!(recalls, vec![0.25, 0.5, 0.5, 0.25, 0.75, 0.75, 1.0]);
    }

    #[test]
    fn recall_monotone_in_distance() {
        let gt = Pose2::new(0.0, 0.0, 0.0);
        let cases: Vec<_> = (0..50).map(|k| (Pose2::new(k as f64 * 0.23, 0.0, 0.0), gt)).collect();
        let ts: Vec<_> = (1..40).map(|k| RecallThreshold::distance(k as f64 * 0.3)).collect();
        let table = single_frame_recall(&cases, &ts);
        assert!(table.windows(2).all(|w| w[0].recall <= w[1].recall));
    }

    #[test]
    fn threshold_labels() {
        assert_eq!(RecallThreshold::distance(0.5).to_string(), "0.5m");
        assert_eq!(RecallThreshold::joint(1.0, 30.0).to_string(), "1m 30°");
    }
}
