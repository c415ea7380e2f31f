//! Hybrid segmentation loss: `ℓ = ℓ_bce + ℓ_ssim + ℓ_iou`, and the weighted
//! sum over one fused and five side outputs.

use serde::{Deserialize, Serialize};

use super::kernel::{filter_separable, gaussian_kernel};
use super::{check_dims, to_f64, MetricError};
use crate::probmap::ProbabilityMap;

/// Predictions are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` for cross entropy only.
pub const BCE_CLAMP: f64 = 1e-7;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
pub const SIDE_OUTPUTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTerms {
    pub bce: f64,
    pub ssim: f64,
    pub iou: f64,
}

impl HybridTerms {
    pub fn sum(&self) -> f64 {
        self.bce + self.ssim + self.iou
    }
}

pub fn hybrid_loss_terms(pred: &ProbabilityMap, gt: &ProbabilityMap) -> Result<HybridTerms, MetricError> {
    check_dims(pred, gt)?;
    let p = to_f64(pred);
    let g = to_f64(gt);
    let n = p.len().max(1) as f64;

    let bce = p
        .iter()
        .zip(&g)
        .map(|(&pv, &gv)| {
            let pc = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(gv * pc.ln() + (1.0 - gv) * (1.0 - pc).ln())
        })
        .sum::<f64>()
        / n;

    let (w, h) = (pred.width(), pred.height());
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let mu_p = filter_separable(&p, w, h, &k);
    let mu_g = filter_separable(&g, w, h, &k);
    let pp: Vec<f64> = p.iter().map(|v| v * v).collect();
    let gg: Vec<f64> = g.iter().map(|v| v * v).collect();
    let pg: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a * b).collect();
    let e_pp = filter_separable(&pp, w, h, &k);
    let e_gg = filter_separable(&gg, w, h, &k);
    let e_pg = filter_separable(&pg, w, h, &k);
    let mut ssim_sum = 0.0;
    for i in 0..p.len() {
        let (mp, mg) = (mu_p[i], mu_g[i]);
        let var_p = e_pp[i] - mp * mp;
        let var_g = e_gg[i] - mg * mg;
        let cov = e_pg[i] - mp * mg;
        ssim_sum += ((2.0 * mp * mg + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mp * mp + mg * mg + SSIM_C1) * (var_p + var_g + SSIM_C2));
    }
    let ssim = 1.0 - ssim_sum / n;

    let inter: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
    let union = p.iter().sum::<f64>() + g.iter().sum::<f64>() - inter;
    let iou = if union > 0.0 { 1.0 - inter / union } else { 0.0 };

    Ok(HybridTerms { bce, ssim, iou })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridLossConfig {
    pub alpha_fuse: f64,
    pub alpha_side: [f64; SIDE_OUTPUTS],
}

impl Default for HybridLossConfig {
    fn default() -> Self {
        Self {
            alpha_fuse: 1.0,
            alpha_side: [1.0; SIDE_OUTPUTS],
        }
    }
}

impl HybridLossConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if ok(self.alpha_fuse) && self.alpha_side.iter().all(|&w| ok(w)) {
            Ok(())
        } else {
            Err(MetricError::InvalidWeights)
        }
    }
}

/// `α_fuse·ℓ_fuse + Σ_k α_side[k]·ℓ_side[k]` over exactly five side terms.
pub fn total_loss(fuse: f64, side: &[f64], cfg: &HybridLossConfig) -> Result<f64, MetricError> {
    if side.len() != SIDE_OUTPUTS {
        return Err(MetricError::ArityMismatch {
            expected: SIDE_OUTPUTS,
            got: side.len(),
        });
    }
    cfg.validate()?;
    Ok(cfg.alpha_fuse * fuse + cfg.alpha_side.iter().zip(side).map(|(a, l)| a * l).sum::<f64>())
}
