//! Mask quality metrics over (prediction, ground truth) probability maps.
//!
//! Ground truth is binarized at `> 0.5` wherever a metric needs a binary mask;
//! MAE and the hybrid-loss terms use the raw values.

mod edt;
mod fmeasure;
mod kernel;
mod loss;
mod mae;
mod smeasure;
mod weighted_f;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probmap::ProbabilityMap;

pub use edt::nearest_foreground;
pub use fmeasure::{max_f, F_BETA_SQ, THRESHOLD_COUNT};
pub use kernel::gaussian_kernel;
pub use loss::{hybrid_loss_terms, total_loss, HybridLossConfig, HybridTerms, BCE_CLAMP, SSIM_C1, SSIM_C2};
pub use mae::mae;
pub use smeasure::s_measure;
pub use weighted_f::weighted_f;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("prediction is {0}x{1} but ground truth is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("expected {expected} side terms, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("loss weights must be finite and non-negative")]
    InvalidWeights,
}

/// A score that may be undefined because the ground truth has no foreground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub empty_ground_truth: bool,
}

impl Score {
    pub(crate) fn defined(value: f64) -> Self {
        Self { value, empty_ground_truth: false }
    }

    pub(crate) fn empty() -> Self {
        Self { value: 0.0, empty_ground_truth: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub s_measure: f64,
    pub weighted_f: f64,
    pub max_f: f64,
    #[serde(default)]
    pub empty_ground_truth: bool,
}

impl MetricReport {
    pub fn evaluate(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<Self, MetricError> {
        let max = max_f(pred, gt)?;
        let wf = weighted_f(pred, gt)?;
        Ok(Self {
            mae: mae(pred, gt)?,
            s_measure: s_measure(pred, gt)?,
            weighted_f: wf.value,
            max_f: max.value,
            empty_ground_truth: max.empty_ground_truth || wf.empty_ground_truth,
        })
    }

    /// Component-wise mean; `None` for an empty slice.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(MetricReport {
            mae: sum(|r| r.mae),
            s_measure: sum(|r| r.s_measure),
            weighted_f: sum(|r| r.weighted_f),
            max_f: sum(|r| r.max_f),
            empty_ground_truth: reports.iter().any(|r| r.empty_ground_truth),
        })
    }
}

pub(crate) fn check_dims(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<(), MetricError> {
    if !pred.same_dims(gt) {
        return Err(MetricError::DimensionMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    Ok(())
}

pub(crate) fn binarize(gt: &ProbabilityMap) -> Vec<bool> {
    gt.scores().iter().map(|&g| g > 0.5).collect()
}

pub(crate) fn to_f64(m: &ProbabilityMap) -> Vec<f64> {
    m.scores().iter().map(|&v| v as f64).collect()
}
