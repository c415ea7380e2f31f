//! Weighted F-measure (β = 1).
//!
//! Errors `E = |pred − gt|` are first made spatially dependent: background
//! pixels inherit the error of their nearest foreground pixel, the result is
//! smoothed with a 7×7 Gaussian (σ = 5), and foreground pixels keep the smaller
//! of raw and smoothed error. Background errors are then scaled by
//! `2 − exp(ln(0.5)/5 · Δ)` where Δ is the distance to the foreground.

use super::kernel::{filter_separable, gaussian_kernel};
use super::{binarize, check_dims, nearest_foreground, to_f64, MetricError, Score};
use crate::probmap::ProbabilityMap;

const BETA_SQ: f64 = 1.0;
const KERNEL_SIZE: usize = 7;
const KERNEL_SIGMA: f64 = 5.0;
const IMPORTANCE_DECAY: f64 = 5.0;

pub fn weighted_f(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<Score, MetricError> {
    check_dims(pred, gt)?;
    let (w, h) = (pred.width(), pred.height());
    let g = binarize(gt);
    let Some((dist, nearest)) = nearest_foreground(&g, w, h) else {
        return Ok(Score::empty());
    };
    let p = to_f64(pred);
    let err: Vec<f64> = p
        .iter()
        .zip(&g)
        .map(|(&pv, &fg)| (pv - if fg { 1.0 } else { 0.0 }).abs())
        .collect();
    let dependent: Vec<f64> = (0..err.len()).map(|i| err[nearest[i]]).collect();
    let smoothed = filter_separable(&dependent, w, h, &gaussian_kernel(KERNEL_SIZE, KERNEL_SIGMA));

    let decay = 0.5f64.ln() / IMPORTANCE_DECAY;
    let (mut fg_count, mut fg_err, mut bg_err) = (0.0, 0.0, 0.0);
    for i in 0..err.len() {
        if g[i] {
            let e = if smoothed[i] < err[i] { smoothed[i] } else { err[i] };
            fg_count += 1.0;
            fg_err += e;
        } else {
            bg_err += err[i] * (2.0 - (decay * dist[i]).exp());
        }
    }
    let tp = fg_count - fg_err;
    let recall = 1.0 - fg_err / fg_count;
    let precision = if tp + bg_err > 0.0 { tp / (tp + bg_err) } else { 0.0 };
    let denom = BETA_SQ * precision + recall;
    let q = if denom > 0.0 {
        (1.0 + BETA_SQ) * recall * precision / denom
    } else {
        0.0
    };
    Ok(Score::defined(q.clamp(0.0, 1.0)))
}
