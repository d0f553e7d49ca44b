//! Randomized audit of the analytic loss gradients against central finite
//! differences of the loss values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{loss_gradient, loss_value_raw, LossKind, LossParams};
use crate::rng::XorShift64Star;
use crate::types::{BinaryMask, ProbMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub size: usize,
    pub step: f64,
    /// Predictions are drawn uniformly from `(low, high)`.
    pub low: f64,
    pub high: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 7,
            size: 8,
            step: 1e-5,
            low: 0.05,
            high: 0.95,
        }
    }
}

pub const RELATIVE_TOLERANCE: f64 = 1e-4;
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindReport {
    pub kind: LossKind,
    pub max_relative_error: f64,
    pub entries_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub per_kind: Vec<KindReport>,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Relative error with an absolute floor: passing `<= RELATIVE_TOLERANCE`
/// means `|a - n| <= max(1e-4 * max(|a|, |n|), 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic
        .abs()
        .max(numeric.abs())
        .max(ABSOLUTE_FLOOR / RELATIVE_TOLERANCE);
    (analytic - numeric).abs() / scale
}

/// Central difference of the loss at every pixel.
pub fn numeric_gradient(kind: LossKind, pred: &ProbMap, gt: &BinaryMask, params: &LossParams, step: f64) -> Vec<f64> {
    let mut work = pred.values().to_vec();
    (0..work.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + step;
            let plus = loss_value_raw(kind, &work, gt.values(), params);
            work[i] = orig - step;
            let minus = loss_value_raw(kind, &work, gt.values(), params);
            work[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

pub fn random_pair(rng: &mut XorShift64Star, size: usize, low: f64, high: f64) -> Result<(ProbMap, BinaryMask)> {
    let n = size * size;
    let pred: Vec<f64> = (0..n).map(|_| rng.uniform(low, high)).collect();
    let gt: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.5) as u8).collect();
    Ok((ProbMap::new(size, size, pred)?, BinaryMask::new(size, size, gt)?))
}

pub fn run(cfg: &GradcheckConfig, params: &LossParams) -> Result<GradcheckReport> {
    if cfg.size == 0 || cfg.trials == 0 {
        return Err(Error::param("gradcheck", "trials and size must be >= 1"));
    }
    if !(cfg.step > 0.0 && cfg.low - cfg.step >= 0.0 && cfg.high + cfg.step <= 1.0 && cfg.low < cfg.high) {
        return Err(Error::param(
            "gradcheck",
            "prediction range widened by the step must stay inside [0, 1]",
        ));
    }
    params.validate()?;
    let mut rng = XorShift64Star::new(cfg.seed);
    let mut per_kind: Vec<KindReport> = LossKind::ALL
        .iter()
        .map(|&kind| KindReport {
            kind,
            max_relative_error: 0.0,
            entries_checked: 0,
        })
        .collect();
    for _ in 0..cfg.trials {
        let (pred, gt) = random_pair(&mut rng, cfg.size, cfg.low, cfg.high)?;
        for report in per_kind.iter_mut() {
            let analytic = loss_gradient(report.kind, &pred, &gt, params)?;
            let numeric = numeric_gradient(report.kind, &pred, &gt, params, cfg.step);
            for (&a, &n) in analytic.values().iter().zip(&numeric) {
                report.max_relative_error = report.max_relative_error.max(relative_error(a, n));
                report.entries_checked += 1;
            }
        }
    }
    let max_relative_error = per_kind.iter().map(|k| k.max_relative_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        config: *cfg,
        per_kind,
        max_relative_error,
        passed: max_relative_error <= RELATIVE_TOLERANCE,
    })
}
