//! Weighted squared error over predicted snapshots.

use crate::dataset::FeatureGrid;
use crate::{Error, Result};

/// `Σ (w·pred − w·truth)²` over snapshots, slots and the four features,
/// with one weight per (snapshot, slot).
pub fn weighted_loss(pred: &FeatureGrid, truth: &FeatureGrid, weights: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != weights.len() {
        return Err(Error::shape(
            format!("{} snapshots", truth.len()),
            format!("{} predicted, {} weight rows", pred.len(), weights.len()),
        ));
    }
    let mut total = 0.0;
    for ((p_row, t_row), w_row) in pred.iter().zip(truth).zip(weights) {
        if p_row.len() != t_row.len() || p_row.len() != w_row.len() {
            return Err(Error::shape(format!("{} slots", t_row.len()), p_row.len()));
        }
        for ((p, t), &w) in p_row.iter().zip(t_row).zip(w_row) {
            for c in 0..p.len() {
                total += (w * p[c] - w * t[c]).powi(2);
            }
        }
    }
    Ok(total)
}
