//! Oracle masks degraded the way network outputs tend to be: blurred, noisy
//! and with block artifacts from upsampling.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use servobench_core::metrics::gaussian_kernel;
use servobench_core::ProbabilityMap;

use super::{ProviderError, SegProvider};
use crate::world::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionProfile {
    /// Pixels; zero disables blurring.
    pub blur_sigma: f64,
    /// Probability units.
    pub noise_sigma: f64,
    pub checkerboard_amplitude: f64,
    /// Block side in pixels; zero disables the pattern.
    pub checkerboard_period: usize,
    pub seed: u64,
}

impl Default for CorruptionProfile {
    fn default() -> Self {
        Self {
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            checkerboard_amplitude: 0.0,
            checkerboard_period: 8,
            seed: 0,
        }
    }
}

impl CorruptionProfile {
    /// Blur σ = 2, noise σ = 0.05, checkerboard ±0.1 in 8 px blocks.
    pub fn standard() -> Self {
        Self {
            blur_sigma: 2.0,
            noise_sigma: 0.05,
            checkerboard_amplitude: 0.1,
            ..Self::default()
        }
    }
}

/// Separable Gaussian truncated at 3σ, edge pixels replicated.
pub fn gaussian_blur(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let r = (3.0 * sigma).ceil() as usize;
    let k = gaussian_kernel(2 * r + 1, sigma);
    let pass = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; src.len()];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let o = i as isize - r as isize;
                    let (xx, yy) = if horizontal {
                        ((x as isize + o).clamp(0, width as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + o).clamp(0, height as isize - 1) as usize)
                    };
                    acc += kv * src[yy * width + xx];
                }
                out[y * width + x] = acc;
            }
        }
        out
    };
    pass(&pass(values, true), false)
}

/// Blur → additive Gaussian noise → ±amplitude checkerboard → clamp to [0, 1].
/// The block containing pixel (0, 0) is raised.
pub fn corrupt(map: &ProbabilityMap, profile: &CorruptionProfile) -> ProbabilityMap {
    let (w, h) = (map.width(), map.height());
    let mut v: Vec<f64> = map.scores().iter().map(|&s| s as f64).collect();
    v = gaussian_blur(&v, w, h, profile.blur_sigma);
    if profile.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let normal = Normal::new(0.0, profile.noise_sigma).expect("finite positive sigma");
        for x in v.iter_mut() {
            *x += normal.sample(&mut rng);
        }
    }
    let (amp, period) = (profile.checkerboard_amplitude, profile.checkerboard_period);
    if amp != 0.0 && period > 0 {
        for y in 0..h {
            for x in 0..w {
                let even = (x / period + y / period) % 2 == 0;
                v[y * w + x] += if even { amp } else { -amp };
            }
        }
    }
    ProbabilityMap::from_clamped(w, h, v).expect("dimensions unchanged")
}

/// Oracle masks passed through [`corrupt`]. Each call draws fresh noise from
/// a stream derived from the profile seed and a per-provider call counter, so
/// a provider replays identically when rebuilt with the same seed.
#[derive(Debug)]
pub struct CorruptProvider {
    profile: CorruptionProfile,
    calls: AtomicU64,
}

impl CorruptProvider {
    pub fn new(profile: CorruptionProfile) -> Self {
        Self {
            profile,
            calls: AtomicU64::new(0),
        }
    }
}

impl SegProvider for CorruptProvider {
    fn provide(&self, frame: &Frame, prompt: &str) -> Result<ProbabilityMap, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::Relaxed);
        let profile = CorruptionProfile {
            seed: self.profile.seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..self.profile.clone()
        };
        Ok(corrupt(&frame.oracle_mask(prompt), &profile))
    }
}
