// SPDX-License-Identifier: Apache-2.0

use super::{ColumnPrediction, ObservationError};

/// Laplace negative log-likelihood of the ground-truth depths under a prediction,
/// `Σ_i log b̂_i + |d̂_i − d_i| / b̂_i`, without the constant `log 2` per column.
/// Columns with a non-finite ground truth are skipped.
pub fn laplace_nll(pred: &ColumnPrediction, gt_depths: &[f64]) -> Result<f64, ObservationError> {
    if gt_depths.len() != pred.len() {
        return Err(ObservationError::LengthMismatch {
            what: "gt_depths",
            got: gt_depths.len(),
            expected: pred.len(),
        });
    }
    Ok(pred
        .depths()
        .iter()
        .zip(pred.scales())
        .zip(gt_depths)
        .filter(|(_, gt)| gt.is_finite())
        .map(|((d, b), gt)| b.ln() + (d - gt).abs() / b)
        .sum())
}
