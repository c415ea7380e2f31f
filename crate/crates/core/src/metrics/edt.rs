//! Exact Euclidean distance transform with a canonical nearest-pixel choice.

const INF: f64 = 1e20;

/// 1D squared-distance lower envelope (Felzenszwalb & Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola_cut = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
        let mut s = parabola_cut(v[k]);
        // z[0] = -inf, so this stops at k = 0
        while s <= z[k] {
            k -= 1;
            s = parabola_cut(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance from every pixel to the nearest `true` pixel.
fn squared_distance(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    let n = width.max(height);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    let mut col_in = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    let mut grid = vec![0.0; width * height];
    for x in 0..width {
        for y in 0..height {
            col_in[y] = if mask[y * width + x] { 0.0 } else { INF };
        }
        edt_1d(&col_in, &mut col_out, &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; width];
    for y in 0..height {
        let row = grid[y * width..(y + 1) * width].to_vec();
        edt_1d(&row, &mut row_out, &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// For each pixel: Euclidean distance to the nearest foreground pixel and that
/// pixel's index. Among equidistant foreground pixels the first in row-major
/// order wins. Returns `None` when there is no foreground at all.
pub fn nearest_foreground(mask: &[bool], width: usize, height: usize) -> Option<(Vec<f64>, Vec<usize>)> {
    assert_eq!(mask.len(), width * height);
    if !mask.iter().any(|&m| m) {
        return None;
    }
    let d2 = squared_distance(mask, width, height);
    let mut dist = vec![0.0; mask.len()];
    let mut nearest = vec![0usize; mask.len()];
    let (w, h) = (width as i64, height as i64);
    for i in 0..mask.len() {
        if mask[i] {
            nearest[i] = i;
            continue;
        }
        let d = d2[i].round() as i64;
        dist[i] = (d as f64).sqrt();
        let (px, py) = ((i % width) as i64, (i / width) as i64);
        let reach = isqrt(d);
        // lattice points on the circle of radius √d, visited in row-major order
        'search: for dy in -reach..=reach {
            let y = py + dy;
            if !(0..h).contains(&y) {
                continue;
            }
            let rem = d - dy * dy;
            let dx = isqrt(rem);
            if dx * dx != rem {
                continue;
            }
            for x in [px - dx, px + dx] {
                if (0..w).contains(&x) && mask[(y * w + x) as usize] {
                    nearest[i] = (y * w + x) as usize;
                    break 'search;
                }
            }
        }
    }
    Some((dist, nearest))
}
