use super::{binarize, check_dims, MetricError, Score};
use crate::probmap::ProbabilityMap;

/// β² of the max-F measure.
pub const F_BETA_SQ: f64 = 0.3;
/// Thresholds `k / 255`, `k = 0..=255`; a pixel is positive when `pred > t`.
pub const THRESHOLD_COUNT: usize = 256;

fn threshold(k: usize) -> f64 {
    k as f64 / 255.0
}

/// Number of thresholds a score strictly exceeds, i.e. `1 + max{k : p > k/255}`.
fn bins_exceeded(p: f64) -> usize {
    let guess = (p * 255.0).floor() as isize;
    let mut k = (guess + 1).clamp(0, THRESHOLD_COUNT as isize - 1) as usize;
    while k > 0 && !(p > threshold(k)) {
        k -= 1;
    }
    if p > threshold(k) {
        k + 1
    } else {
        0
    }
}

pub(crate) fn f_beta(tp: f64, predicted: f64, actual: f64) -> f64 {
    let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    let denom = F_BETA_SQ * precision + recall;
    if precision + recall == 0.0 || denom == 0.0 {
        0.0
    } else {
        (1.0 + F_BETA_SQ) * precision * recall / denom
    }
}

/// Best F_β (β² = 0.3) over 256 evenly spaced binarization thresholds.
pub fn max_f(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<Score, MetricError> {
    check_dims(pred, gt)?;
    let g = binarize(gt);
    let actual = g.iter().filter(|&&b| b).count();
    if actual == 0 {
        return Ok(Score::empty());
    }
    // fg_hist[b] / bg_hist[b]: pixels exceeding exactly b thresholds.
    let mut fg_hist = [0usize; THRESHOLD_COUNT + 1];
    let mut bg_hist = [0usize; THRESHOLD_COUNT + 1];
    for (&p, &is_fg) in pred.scores().iter().zip(&g) {
        let b = bins_exceeded(p as f64);
        if is_fg {
            fg_hist[b] += 1;
        } else {
            bg_hist[b] += 1;
        }
    }
    // positives at threshold k: pixels with more than k thresholds exceeded
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = 0.0f64;
    for k in (0..THRESHOLD_COUNT).rev() {
        tp += fg_hist[k + 1];
        fp += bg_hist[k + 1];
        best = best.max(f_beta(tp as f64, (tp + fp) as f64, actual as f64));
    }
    Ok(Score::defined(best))
}
