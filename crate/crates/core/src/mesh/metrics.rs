use serde::{Deserialize, Serialize};

use super::KdTree;
use crate::error::{Error, Result};
use crate::scene::Vec3;

/// Point-cloud reconstruction scores. Distances are in the units of the
/// input clouds; a point counts as matched when its distance is at most
/// `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub completeness: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub threshold: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "accuracy,completeness,precision,recall,fscore,threshold";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.accuracy, self.completeness, self.precision, self.recall, self.fscore, self.threshold
        )
    }

    /// `(accuracy + completeness) / 2`.
    pub fn chamfer(&self) -> f64 {
        0.5 * (self.accuracy + self.completeness)
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn eval_metrics(pred: &[Vec3], gt: &[Vec3], threshold: f64) -> Result<EvalReport> {
    if pred.is_empty() {
        return Err(Error::Empty("predicted point cloud is empty".into()));
    }
    if gt.is_empty() {
        return Err(Error::Empty("reference point cloud is empty".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let d_pred = KdTree::new(gt).distances(pred);
    let d_gt = KdTree::new(pred).distances(gt);
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    let frac = |d: &[f64]| d.iter().filter(|v| **v <= threshold).count() as f64 / d.len() as f64;
    let (precision, recall) = (frac(&d_pred), frac(&d_gt));
    Ok(EvalReport {
        accuracy: mean(&d_pred),
        completeness: mean(&d_gt),
        precision,
        recall,
        fscore: f_score(precision, recall),
        threshold,
    })
}
