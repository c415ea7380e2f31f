//! Structure measure: `S = 0.5·S_object + 0.5·S_region`.
//!
//! - `S_object` compares foreground and background score distributions
//!   (`2x / (x² + 1 + σ)` on each side, mixed by the foreground fraction).
//! - `S_region` splits both maps into four quadrants at the ground-truth
//!   centroid and sums a simplified SSIM per quadrant, weighted by area.

use super::{binarize, check_dims, to_f64, MetricError};
use crate::probmap::ProbabilityMap;

const ALPHA: f64 = 0.5;

struct Moments {
    count: usize,
    mean: f64,
    /// Sample standard deviation (`N − 1` denominator; zero below two samples).
    std: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> Moments {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if count == 0 {
        return Moments { count, mean: 0.0, std: 0.0 };
    }
    let mean = sum / count as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let std = if count > 1 { (ss / (count - 1) as f64).sqrt() } else { 0.0 };
    Moments { count, mean, std }
}

fn object_similarity(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = moments(values);
    if m.count == 0 {
        return 0.0;
    }
    2.0 * m.mean / (m.mean * m.mean + 1.0 + m.std)
}

fn object_score(pred: &[f64], gt: &[bool]) -> f64 {
    let fg_fraction = gt.iter().filter(|&&g| g).count() as f64 / gt.len() as f64;
    let fg = pred.iter().zip(gt).filter(|(_, &g)| g).map(|(&p, _)| p);
    let bg = pred.iter().zip(gt).filter(|(_, &g)| !g).map(|(&p, _)| 1.0 - p);
    fg_fraction * object_similarity(fg) + (1.0 - fg_fraction) * object_similarity(bg)
}

/// Split point `(x, y)`: rounded (half-to-even) foreground centroid plus one,
/// so quadrant `[0, x) × [0, y)` includes the centroid pixel.
fn split_point(gt: &[bool], width: usize, height: usize) -> (usize, usize) {
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for (i, _) in gt.iter().enumerate().filter(|(_, &g)| g) {
        n += 1;
        sx += (i % width) as f64;
        sy += (i / width) as f64;
    }
    if n == 0 {
        let x = (width as f64 / 2.0).round_ties_even() as usize;
        let y = (height as f64 / 2.0).round_ties_even() as usize;
        return (x.min(width), y.min(height));
    }
    let x = (sx / n as f64).round_ties_even() as usize + 1;
    let y = (sy / n as f64).round_ties_even() as usize + 1;
    (x.min(width), y.min(height))
}

/// Simplified SSIM of one quadrant.
fn quadrant_ssim(pred: &[f64], gt: &[bool], width: usize, xs: (usize, usize), ys: (usize, usize)) -> f64 {
    let count = (xs.1 - xs.0) * (ys.1 - ys.0);
    if count == 0 {
        return 0.0;
    }
    let idx = || (ys.0..ys.1).flat_map(move |y| (xs.0..xs.1).map(move |x| y * width + x));
    let n = count as f64;
    let gv = |i: usize| if gt[i] { 1.0 } else { 0.0 };
    let x_mean = idx().map(|i| pred[i]).sum::<f64>() / n;
    let y_mean = idx().map(gv).sum::<f64>() / n;
    let denom = (count.max(2) - 1) as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in idx() {
        let dx = pred[i] - x_mean;
        let dy = gv(i) - y_mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / denom, syy / denom, sxy / denom);
    let alpha = 4.0 * x_mean * y_mean * sxy;
    let beta = (x_mean * x_mean + y_mean * y_mean) * (sxx + syy);
    if alpha != 0.0 {
        if beta == 0.0 { 0.0 } else { alpha / beta }
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn region_score(pred: &[f64], gt: &[bool], width: usize, height: usize) -> f64 {
    let (x, y) = split_point(gt, width, height);
    let quads = [
        ((0, x), (0, y)),
        ((x, width), (0, y)),
        ((0, x), (y, height)),
        ((x, width), (y, height)),
    ];
    let mut acc = 0.0;
    for (xs, ys) in quads {
        let area = ((xs.1 - xs.0) * (ys.1 - ys.0)) as f64;
        if area > 0.0 {
            acc += area * quadrant_ssim(pred, gt, width, xs, ys);
        }
    }
    acc / (width * height) as f64
}

pub fn s_measure(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<f64, MetricError> {
    check_dims(pred, gt)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let p = to_f64(pred);
    let g = binarize(gt);
    let fg = g.iter().filter(|&&b| b).count();
    let score = if fg == 0 {
        1.0 - p.iter().sum::<f64>() / p.len() as f64
    } else if fg == g.len() {
        p.iter().sum::<f64>() / p.len() as f64
    } else {
        ALPHA * object_score(&p, &g) + (1.0 - ALPHA) * region_score(&p, &g, pred.width(), pred.height())
    };
    Ok(score.clamp(0.0, 1.0))
}
