/// Normalized `size × size` Gaussian as a 1D factor: the 2D kernel is the outer
/// product of the returned vector with itself.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Same-size separable correlation with zero padding. `k` has odd length.
pub(crate) fn filter_separable(src: &[f64], width: usize, height: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let (w, h) = (width as isize, height as isize);
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        let row = &src[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x + i as isize - r;
                if (0..w).contains(&xx) {
                    acc += kv * row[xx as usize];
                }
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y + i as isize - r;
                if (0..h).contains(&yy) {
                    acc += kv * tmp[(yy * w + x) as usize];
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_and_symmetric() {
        let k = gaussian_kernel(7, 5.0);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..7 {
            assert_eq!(k[i], k[6 - i]);
        }
        assert!(k[3] > k[2]);
    }

    #[test]
    fn impulse_response_is_outer_product() {
        let k = gaussian_kernel(3, 1.0);
        let mut img = vec![0.0; 25];
        img[12] = 1.0;
        let out = filter_separable(&img, 5, 5, &k);
        for dy in 0..3 {
            for dx in 0..3 {
                let got = out[(1 + dy) * 5 + 1 + dx];
                assert!((got - k[dy] * k[dx]).abs() < 1e-15);
            }
        }
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
