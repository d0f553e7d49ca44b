//! Composite segmentation loss and its three components.
//!
//! With prediction `p_i`, ground truth `g_i`, `N` pixels, smoothing `eps`
//! and the clamped prediction `q_i = min(max(p_i, delta), 1 - delta)`:
//!
//! ```text
//! dice    = 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)
//! jaccard = 1 - (sum(p g) + eps) / (sum(p) + sum(g) - sum(p g) + eps)
//! focal   = -(1/N) sum[ g a (1-q)^gamma ln q + (1-g)(1-a) q^gamma ln(1-q) ]
//! seg     = alpha_sg focal + beta_sg dice + gamma_sg jaccard
//! ```
//!
//! Dice and Jaccard are soft (probability-weighted) global ratios; focal is
//! a per-pixel mean. Pixels whose prediction falls in the clamp region
//! contribute zero focal gradient.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{same_dims, BinaryMask, FocalParams, LossWeights, ProbMap, SmoothEps};

/// Everything the composite loss needs besides the two grids.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub weights: LossWeights,
    pub focal: FocalParams,
    pub eps: SmoothEps,
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.focal.validate()?;
        self.eps.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dice,
    Jaccard,
    Focal,
    Seg,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Dice, LossKind::Jaccard, LossKind::Focal, LossKind::Seg];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Dice => "dice",
            LossKind::Jaccard => "jaccard",
            LossKind::Focal => "focal",
            LossKind::Seg => "seg",
        }
    }
}

/// Component and composite values for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub focal: f64,
    pub dice: f64,
    pub jaccard: f64,
    pub seg: f64,
}

/// Gradient of a loss with respect to every prediction pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GradMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

struct Sums {
    p: f64,
    g: f64,
    pg: f64,
}

fn sums(pred: &[f64], gt: &[u8]) -> Sums {
    pred.iter().zip(gt).fold(
        Sums {
            p: 0.0,
            g: 0.0,
            pg: 0.0,
        },
        |mut s, (&p, &g)| {
            let g = g as f64;
            s.p += p;
            s.g += g;
            s.pg += p * g;
            s
        },
    )
}

// Slice kernels. Callers have already checked that the lengths agree.

pub(crate) fn dice_value(pred: &[f64], gt: &[u8], eps: f64) -> f64 {
    let s = sums(pred, gt);
    1.0 - (2.0 * s.pg + eps) / (s.p + s.g + eps)
}

pub(crate) fn jaccard_value(pred: &[f64], gt: &[u8], eps: f64) -> f64 {
    let s = sums(pred, gt);
    1.0 - (s.pg + eps) / (s.p + s.g - s.pg + eps)
}

fn clamp(p: f64, delta: f64) -> f64 {
    p.max(delta).min(1.0 - delta)
}

pub(crate) fn focal_value(pred: &[f64], gt: &[u8], fp: &FocalParams) -> f64 {
    let a = fp.focal_alpha;
    let gamma = fp.focal_gamma;
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let q = clamp(p, fp.clamp_delta);
            if g == 1 {
                a * (1.0 - q).powf(gamma) * q.ln()
            } else {
                (1.0 - a) * q.powf(gamma) * (1.0 - q).ln()
            }
        })
        .sum();
    -total / pred.len() as f64
}

pub(crate) fn loss_value_raw(kind: LossKind, pred: &[f64], gt: &[u8], params: &LossParams) -> f64 {
    let eps = params.eps.get();
    match kind {
        LossKind::Dice => dice_value(pred, gt, eps),
        LossKind::Jaccard => jaccard_value(pred, gt, eps),
        LossKind::Focal => focal_value(pred, gt, &params.focal),
        LossKind::Seg => {
            let w = &params.weights;
            w.alpha_sg * focal_value(pred, gt, &params.focal)
                + w.beta_sg * dice_value(pred, gt, eps)
                + w.gamma_sg * jaccard_value(pred, gt, eps)
        }
    }
}

fn dice_grad(pred: &[f64], gt: &[u8], eps: f64) -> Vec<f64> {
    let s = sums(pred, gt);
    let num = 2.0 * s.pg + eps;
    let den = s.p + s.g + eps;
    let den2 = den * den;
    gt.iter().map(|&g| -(2.0 * g as f64 * den - num) / den2).collect()
}

fn jaccard_grad(pred: &[f64], gt: &[u8], eps: f64) -> Vec<f64> {
    let s = sums(pred, gt);
    let num = s.pg + eps;
    let den = s.p + s.g - s.pg + eps;
    let den2 = den * den;
    gt.iter()
        .map(|&g| {
            let g = g as f64;
            -(g * den - num * (1.0 - g)) / den2
        })
        .collect()
}

fn focal_grad(pred: &[f64], gt: &[u8], fp: &FocalParams) -> Vec<f64> {
    let a = fp.focal_alpha;
    let gamma = fp.focal_gamma;
    let delta = fp.clamp_delta;
    let n = pred.len() as f64;
    pred.iter()
        .zip(gt)
        .map(|(&p, &g)| {
            if p <= delta || p >= 1.0 - delta {
                return 0.0;
            }
            let d = if g == 1 {
                // d/dp [(1-p)^gamma ln p]
                let focus = if gamma == 0.0 {
                    0.0
                } else {
                    gamma * (1.0 - p).powf(gamma - 1.0) * p.ln()
                };
                a * ((1.0 - p).powf(gamma) / p - focus)
            } else {
                // d/dp [p^gamma ln(1-p)]
                let focus = if gamma == 0.0 {
                    0.0
                } else {
                    gamma * p.powf(gamma - 1.0) * (1.0 - p).ln()
                };
                (1.0 - a) * (focus - p.powf(gamma) / (1.0 - p))
            };
            -d / n
        })
        .collect()
}

fn gradient_raw(kind: LossKind, pred: &[f64], gt: &[u8], params: &LossParams) -> Vec<f64> {
    let eps = params.eps.get();
    match kind {
        LossKind::Dice => dice_grad(pred, gt, eps),
        LossKind::Jaccard => jaccard_grad(pred, gt, eps),
        LossKind::Focal => focal_grad(pred, gt, &params.focal),
        LossKind::Seg => {
            let w = &params.weights;
            let f = focal_grad(pred, gt, &params.focal);
            let d = dice_grad(pred, gt, eps);
            let j = jaccard_grad(pred, gt, eps);
            f.iter()
                .zip(&d)
                .zip(&j)
                .map(|((f, d), j)| w.alpha_sg * f + w.beta_sg * d + w.gamma_sg * j)
                .collect()
        }
    }
}

pub fn dice_loss(pred: &ProbMap, gt: &BinaryMask, eps: SmoothEps) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(dice_value(pred.values(), gt.values(), eps.get()))
}

pub fn jaccard_loss(pred: &ProbMap, gt: &BinaryMask, eps: SmoothEps) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(jaccard_value(pred.values(), gt.values(), eps.get()))
}

pub fn focal_loss(pred: &ProbMap, gt: &BinaryMask, fp: &FocalParams) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(focal_value(pred.values(), gt.values(), fp))
}

pub fn seg_loss(pred: &ProbMap, gt: &BinaryMask, params: &LossParams) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(loss_value_raw(LossKind::Seg, pred.values(), gt.values(), params))
}

pub fn loss_value(kind: LossKind, pred: &ProbMap, gt: &BinaryMask, params: &LossParams) -> Result<f64> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(loss_value_raw(kind, pred.values(), gt.values(), params))
}

pub fn loss_breakdown(pred: &ProbMap, gt: &BinaryMask, params: &LossParams) -> Result<LossBreakdown> {
    same_dims(pred.dims(), gt.dims())?;
    let (p, g) = (pred.values(), gt.values());
    let focal = focal_value(p, g, &params.focal);
    let dice = dice_value(p, g, params.eps.get());
    let jaccard = jaccard_value(p, g, params.eps.get());
    let w = &params.weights;
    Ok(LossBreakdown {
        focal,
        dice,
        jaccard,
        seg: w.alpha_sg * focal + w.beta_sg * dice + w.gamma_sg * jaccard,
    })
}

/// Analytic gradient of the selected loss with respect to every `p_i`.
pub fn loss_gradient(kind: LossKind, pred: &ProbMap, gt: &BinaryMask, params: &LossParams) -> Result<GradMap> {
    same_dims(pred.dims(), gt.dims())?;
    Ok(GradMap {
        height: pred.height(),
        width: pred.width(),
        values: gradient_raw(kind, pred.values(), gt.values(), params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> BinaryMask {
        BinaryMask::new(n, n, vec![1; n * n]).unwrap()
    }

    fn uniform(n: usize, v: f64) -> ProbMap {
        ProbMap::filled(n, n, v).unwrap()
    }

    fn eps(e: f64) -> SmoothEps {
        SmoothEps::new(e).unwrap()
    }

    #[test]
    fn dice_examples() {
        assert_eq!(dice_loss(&uniform(4, 1.0), &ones(4), eps(1e-6)).unwrap(), 0.0);
        let disjoint = dice_loss(&uniform(4, 0.0), &ones(4), eps(1e-6)).unwrap();
        assert!((disjoint - (1.0 - 1e-6 / (16.0 + 1e-6))).abs() < 1e-15);
        assert!((disjoint - 0.9999999375).abs() < 1e-10);
        // closed form 1 - (16 + eps)/(24 + eps)
        let half = dice_loss(&uniform(4, 0.5), &ones(4), eps(1e-6)).unwrap();
        assert!((half - (1.0 - (16.0 + 1e-6) / (24.0 + 1e-6))).abs() < 1e-15);
        assert!((half - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn jaccard_examples() {
        let gt = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(jaccard_loss(&gt.to_probmap(), &gt, eps(1e-6)).unwrap(), 0.0);
        let half = jaccard_loss(&uniform(4, 0.5), &ones(4), eps(1e-6)).unwrap();
        assert!((half - (1.0 - (8.0 + 1e-6) / (16.0 + 1e-6))).abs() < 1e-15);
        assert!((half - 0.5).abs() < 1e-6);
        let disjoint = jaccard_loss(&uniform(4, 0.0), &ones(4), eps(1e-6)).unwrap();
        assert!((disjoint - 1.0).abs() < 1e-6);
    }

    #[test]
    fn focal_examples() {
        let fp = FocalParams::default();
        let gt = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let perfect = focal_loss(&gt.to_probmap(), &gt, &fp).unwrap();
        assert!((0.0..1e-12).contains(&perfect), "{perfect}");

        let single = focal_loss(
            &ProbMap::new(1, 1, vec![0.5]).unwrap(),
            &BinaryMask::new(1, 1, vec![1]).unwrap(),
            &FocalParams::new(0.25, 2.0, 1e-7).unwrap(),
        )
        .unwrap();
        assert!((single - 0.25 * 0.25 * 2f64.ln()).abs() < 1e-15);
        assert!((single - 0.0433217).abs() < 1e-7);

        let bce_half = FocalParams::new(0.5, 0.0, 1e-7).unwrap();
        let mixed = BinaryMask::new(2, 2, vec![1, 0, 1, 1]).unwrap();
        let v = focal_loss(&uniform(2, 0.5), &mixed, &bce_half).unwrap();
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.3465736).abs() < 1e-7);
    }

    #[test]
    fn seg_examples() {
        let pred = uniform(4, 0.5);
        let gt = ones(4);
        let zero = LossParams {
            weights: LossWeights::new(0.0, 0.0, 0.0).unwrap(),
            ..Default::default()
        };
        assert_eq!(seg_loss(&pred, &gt, &zero).unwrap(), 0.0);
        let focal_only = LossParams {
            weights: LossWeights::new(1.0, 0.0, 0.0).unwrap(),
            ..Default::default()
        };
        assert_eq!(
            seg_loss(&pred, &gt, &focal_only).unwrap(),
            focal_loss(&pred, &gt, &focal_only.focal).unwrap()
        );
        let all = LossParams::default();
        let sum = focal_loss(&pred, &gt, &all.focal).unwrap()
            + dice_loss(&pred, &gt, all.eps).unwrap()
            + jaccard_loss(&pred, &gt, all.eps).unwrap();
        let expected = 0.25 * 0.25 * 2f64.ln() + 1.0 / 3.0 + 0.5;
        let got = seg_loss(&pred, &gt, &all).unwrap();
        assert!((got - sum).abs() < 1e-15);
        assert!((got - expected).abs() < 1e-6);
    }

    #[test]
    fn zero_weight_gradient_is_zero() {
        let params = LossParams {
            weights: LossWeights::new(0.0, 0.0, 0.0).unwrap(),
            ..Default::default()
        };
        let g = loss_gradient(LossKind::Seg, &uniform(3, 0.3), &ones(3), &params).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dice_gradient_at_identity() {
        // p = g = 1 everywhere: num = 2S + eps, den = 2S + eps, so each entry is -(2 den - num)/den^2 = -1/den
        let n = 4;
        let params = LossParams::default();
        let g = loss_gradient(LossKind::Dice, &uniform(n, 1.0), &ones(n), &params).unwrap();
        let den = 32.0 + params.eps.get();
        for &v in g.values() {
            assert!((v + 1.0 / den).abs() < 1e-15);
        }
    }

    #[test]
    fn clamp_region_has_zero_focal_gradient() {
        let params = LossParams::default();
        let pred = ProbMap::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        let gt = BinaryMask::new(1, 3, vec![1, 1, 0]).unwrap();
        let g = loss_gradient(LossKind::Focal, &pred, &gt, &params).unwrap();
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[2], 0.0);
        assert!(g.values()[1] < 0.0);
        assert!(focal_loss(&pred, &gt, &params.focal).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = dice_loss(&uniform(2, 0.5), &ones(3), SmoothEps::default()).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
        assert!(loss_gradient(LossKind::Seg, &uniform(2, 0.5), &ones(3), &LossParams::default()).is_err());
    }
}
