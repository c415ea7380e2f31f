use super::{check_dims, MetricError};
use crate::probmap::ProbabilityMap;

/// Mean absolute per-pixel difference.
pub fn mae(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<f64, MetricError> {
    check_dims(pred, gt)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .scores()
        .iter()
        .zip(gt.scores())
        .map(|(&p, &g)| (p as f64 - g as f64).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}
