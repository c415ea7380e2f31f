//! Independent reference implementations used as test oracles.
//!
//! Everything here is written directly from the metric/geometry definitions
//! with plain loops: 2D kernels built as 2D exponentials, nearest foreground
//! found by exhaustive search, eigen-decomposition by nalgebra. None of it
//! shares code with the crate under test.
#![allow(dead_code)]

use nalgebra::{Matrix2, SymmetricEigen};

pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Grid {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.v[y * self.w + x]
    }

    pub fn at_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x >= self.w as isize || y >= self.h as isize {
            0.0
        } else {
            self.at(x as usize, y as usize)
        }
    }
}

// ---------------------------------------------------------------- geometry

/// Distance from (px, py) to the line through (x1, y1) and (x2, y2).
pub fn point_line_distance(px: f64, py: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    ((y2 - y1) * px - (x2 - x1) * py + x2 * y1 - y2 * x1).abs() / ((y2 - y1).powi(2) + (x2 - x1).powi(2)).sqrt()
}

/// |sin θ| between two direction vectors.
pub fn abs_sin_between(d1: (f64, f64), d2: (f64, f64)) -> f64 {
    let n1 = d1.0.hypot(d1.1);
    let n2 = d2.0.hypot(d2.1);
    let cos = ((d1.0 * d2.0 + d1.1 * d2.1) / (n1 * n2)).clamp(-1.0, 1.0);
    (1.0 - cos * cos).max(0.0).sqrt()
}

// ---------------------------------------------------------------- PCA

/// (centroid, major axis (unsigned), (λ1, λ2)) via nalgebra's symmetric eigensolver.
pub fn pca_reference(points: &[(f64, f64)]) -> ((f64, f64), (f64, f64), (f64, f64)) {
    let n = points.len() as f64;
    let cu = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cv = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = Matrix2::zeros();
    for &(u, v) in points {
        let d = nalgebra::Vector2::new(u - cu, v - cv);
        cov += d * d.transpose() / n;
    }
    let eig = SymmetricEigen::new(cov);
    let (i_max, i_min) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let axis = eig.eigenvectors.column(i_max);
    ((cu, cv), (axis[0], axis[1]), (eig.eigenvalues[i_max], eig.eigenvalues[i_min]))
}

/// Angle between two undirected axes, in degrees, in [0, 90].
pub fn axis_angle_deg(a: (f64, f64), b: (f64, f64)) -> f64 {
    let na = a.0.hypot(a.1);
    let nb = b.0.hypot(b.1);
    ((a.0 * b.0 + a.1 * b.1).abs() / (na * nb)).clamp(0.0, 1.0).acos().to_degrees()
}

/// Binary mask of a `length × thickness` bar centered at (cx, cy), rotated by
/// `theta` (radians, image coordinates), sampled at pixel centers.
pub fn bar_mask(w: usize, h: usize, cx: f64, cy: f64, length: f64, thickness: f64, theta: f64) -> Vec<f32> {
    let (c, s) = (theta.cos(), theta.sin());
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let along = dx * c + dy * s;
            let across = -dx * s + dy * c;
            if along.abs() <= length / 2.0 && across.abs() <= thickness / 2.0 {
                out[y * w + x] = 1.0;
            }
        }
    }
    out
}

// ---------------------------------------------------------------- metrics

pub fn mae(p: &Grid, g: &Grid) -> f64 {
    let mut s = 0.0;
    for y in 0..p.h {
        for x in 0..p.w {
            s += (p.at(x, y) - g.at(x, y)).abs();
        }
    }
    s / (p.w * p.h) as f64
}

fn fg(g: &Grid, x: usize, y: usize) -> bool {
    g.at(x, y) > 0.5
}

pub fn max_f(p: &Grid, g: &Grid) -> f64 {
    let beta2 = 0.3;
    let mut best = 0.0f64;
    for k in 0..256 {
        let t = k as f64 / 255.0;
        let (mut tp, mut fp, mut pos_gt) = (0.0, 0.0, 0.0);
        for y in 0..p.h {
            for x in 0..p.w {
                let positive = p.at(x, y) > t;
                if fg(g, x, y) {
                    pos_gt += 1.0;
                    if positive {
                        tp += 1.0;
                    }
                } else if positive {
                    fp += 1.0;
                }
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if pos_gt > 0.0 { tp / pos_gt } else { 0.0 };
        let f = if precision + recall > 0.0 {
            (1.0 + beta2) * precision * recall / (beta2 * precision + recall)
        } else {
            0.0
        };
        best = best.max(f);
    }
    best
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn ssim_block(p: &Grid, g: &Grid, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let mut pv = vec![];
    let mut gv = vec![];
    for y in y0..y1 {
        for x in x0..x1 {
            pv.push(p.at(x, y));
            gv.push(if fg(g, x, y) { 1.0 } else { 0.0 });
        }
    }
    let n = pv.len() as f64;
    let mx = pv.iter().sum::<f64>() / n;
    let my = gv.iter().sum::<f64>() / n;
    let d = if pv.len() > 1 { n - 1.0 } else { 1.0 };
    let sx = pv.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / d;
    let sy = gv.iter().map(|v| (v - my).powi(2)).sum::<f64>() / d;
    let sxy = pv.iter().zip(&gv).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / d;
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sx + sy);
    if alpha != 0.0 && beta != 0.0 {
        alpha / beta
    } else if alpha == 0.0 && beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn s_measure(p: &Grid, g: &Grid) -> f64 {
    let total = (p.w * p.h) as f64;
    let mut fg_pred = vec![];
    let mut bg_pred = vec![];
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..p.h {
        for x in 0..p.w {
            if fg(g, x, y) {
                fg_pred.push(p.at(x, y));
                sx += x as f64;
                sy += y as f64;
            } else {
                bg_pred.push(1.0 - p.at(x, y));
            }
        }
    }
    let mean_p = p.v.iter().sum::<f64>() / total;
    if fg_pred.is_empty() {
        return (1.0 - mean_p).clamp(0.0, 1.0);
    }
    if bg_pred.is_empty() {
        return mean_p.clamp(0.0, 1.0);
    }
    let u = fg_pred.len() as f64 / total;
    let obj = |vals: &[f64]| {
        let (m, s) = mean_std(vals);
        2.0 * m / (m * m + 1.0 + s)
    };
    let s_object = u * obj(&fg_pred) + (1.0 - u) * obj(&bg_pred);

    let nf = fg_pred.len() as f64;
    let cx = ((sx / nf).round_ties_even() as usize + 1).min(p.w);
    let cy = ((sy / nf).round_ties_even() as usize + 1).min(p.h);
    let mut s_region = 0.0;
    for (x0, x1, y0, y1) in [(0, cx, 0, cy), (cx, p.w, 0, cy), (0, cx, cy, p.h), (cx, p.w, cy, p.h)] {
        let area = ((x1 - x0) * (y1 - y0)) as f64;
        if area > 0.0 {
            s_region += area / total * ssim_block(p, g, x0, x1, y0, y1);
        }
    }
    (0.5 * s_object + 0.5 * s_region).clamp(0.0, 1.0)
}

/// Direct 2D same-size correlation with zero padding and a 2D Gaussian kernel.
fn gauss_filter_2d(src: &Grid, size: usize, sigma: f64) -> Grid {
    let r = (size / 2) as isize;
    let mut k = vec![];
    for dy in -r..=r {
        for dx in -r..=r {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let ks: f64 = k.iter().sum();
    let mut out = vec![0.0; src.v.len()];
    for y in 0..src.h as isize {
        for x in 0..src.w as isize {
            let mut acc = 0.0;
            let mut i = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    acc += k[i] / ks * src.at_or_zero(x + dx, y + dy);
                    i += 1;
                }
            }
            out[(y * src.w as isize + x) as usize] = acc;
        }
    }
    Grid { w: src.w, h: src.h, v: out }
}

pub fn weighted_f(p: &Grid, g: &Grid) -> f64 {
    let (w, h) = (p.w, p.h);
    let fg_pixels: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| fg(g, x, y))
        .collect();
    if fg_pixels.is_empty() {
        return 0.0;
    }
    let err = |x: usize, y: usize| (p.at(x, y) - if fg(g, x, y) { 1.0 } else { 0.0 }).abs();
    let mut dist = vec![0.0; w * h];
    let mut et = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            if fg(g, x, y) {
                et[y * w + x] = err(x, y);
                continue;
            }
            let mut best = (f64::INFINITY, (0, 0));
            for &(fx, fy) in &fg_pixels {
                let d = ((fx as f64 - x as f64).powi(2) + (fy as f64 - y as f64).powi(2)).sqrt();
                if d < best.0 {
                    best = (d, (fx, fy));
                }
            }
            dist[y * w + x] = best.0;
            et[y * w + x] = err(best.1 .0, best.1 .1);
        }
    }
    let ea = gauss_filter_2d(&Grid { w, h, v: et }, 7, 5.0);
    let (mut tpw, mut fpw, mut fg_err, mut nfg) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let e = err(x, y);
            if fg(g, x, y) {
                let m = if ea.at(x, y) < e { ea.at(x, y) } else { e };
                nfg += 1.0;
                fg_err += m;
            } else {
                let importance = 2.0 - ((0.5f64).ln() / 5.0 * dist[y * w + x]).exp();
                fpw += e * importance;
            }
        }
    }
    tpw += nfg - fg_err;
    let r = 1.0 - fg_err / nfg;
    let precision = if tpw + fpw > 0.0 { tpw / (tpw + fpw) } else { 0.0 };
    if r + precision > 0.0 {
        2.0 * r * precision / (r + precision)
    } else {
        0.0
    }
}

/// (bce, 1 − ssim, 1 − iou)
pub fn hybrid(p: &Grid, g: &Grid) -> (f64, f64, f64) {
    let n = p.v.len() as f64;
    let mut bce = 0.0;
    for (pv, gv) in p.v.iter().zip(&g.v) {
        let pc = pv.max(1e-7).min(1.0 - 1e-7);
        bce += -(gv * pc.ln() + (1.0 - gv) * (1.0 - pc).ln());
    }
    bce /= n;

    let sq = |a: &Grid, b: &Grid| Grid {
        w: a.w,
        h: a.h,
        v: a.v.iter().zip(&b.v).map(|(x, y)| x * y).collect(),
    };
    let mp = gauss_filter_2d(p, 11, 1.5);
    let mg = gauss_filter_2d(g, 11, 1.5);
    let epp = gauss_filter_2d(&sq(p, p), 11, 1.5);
    let egg = gauss_filter_2d(&sq(g, g), 11, 1.5);
    let epg = gauss_filter_2d(&sq(p, g), 11, 1.5);
    let (c1, c2) = (0.0001, 0.0009);
    let mut ssim = 0.0;
    for i in 0..p.v.len() {
        let (a, b) = (mp.v[i], mg.v[i]);
        let num = (2.0 * a * b + c1) * (2.0 * (epg.v[i] - a * b) + c2);
        let den = (a * a + b * b + c1) * ((epp.v[i] - a * a) + (egg.v[i] - b * b) + c2);
        ssim += num / den;
    }
    ssim /= n;

    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (pv, gv) in p.v.iter().zip(&g.v) {
        inter += pv * gv;
        sp += pv;
        sg += gv;
    }
    let union = sp + sg - inter;
    let iou = if union > 0.0 { 1.0 - inter / union } else { 0.0 };
    (bce, 1.0 - ssim, iou)
}
