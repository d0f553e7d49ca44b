//! Welch two-sample t-test with two-tailed p-values from the Student-t
//! distribution.

use serde::Serialize;

use crate::error::{Error, Result};

/// Repeated evaluation scores (e.g. per-fold F1) of one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    label: String,
    scores: Vec<f64>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if scores.len() < 2 {
            return Err(Error::NotEnoughSamples {
                label,
                found: scores.len(),
            });
        }
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && (0.0..=1.0).contains(*s)))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self { label, scores })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Sample mean and unbiased (n - 1) variance.
pub fn mean_var(s: &SampleSet) -> (f64, f64) {
    let xs = s.scores();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Both samples have zero variance; `t` and `p` follow the
    /// equal-means-p-is-1 / unequal-means-p-is-0 convention.
    pub degenerate: bool,
}

/// Two-tailed Welch t-test of `a` against `b`.
pub fn welch_t_test(a: &SampleSet, b: &SampleSet) -> TTestResult {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.scores().len() as f64, b.scores().len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let diff = ma - mb;
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(diff), 0.0)
        };
        return TTestResult {
            t,
            dof: na + nb - 2.0,
            p,
            mean_a: ma,
            mean_b: mb,
            degenerate: true,
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = two_tailed_p(t, dof);
    TTestResult {
        t,
        dof,
        p,
        mean_a: ma,
        mean_b: mb,
        degenerate: false,
    }
}

fn two_tailed_p(t: f64, dof: f64) -> f64 {
    let t2 = t * t;
    // P(|T| > |t|) = I_x(dof/2, 1/2) with x = dof / (dof + t^2)
    let x = dof / (dof + t2);
    let one_minus_x = t2 / (dof + t2);
    reg_inc_beta(x, one_minus_x, 0.5 * dof, 0.5).clamp(0.0, 1.0)
}

/// Upper-tail probability `P(T > t)` of Student's t with `dof` degrees of
/// freedom.
pub fn student_t_sf(t: f64, dof: f64) -> Result<f64> {
    if dof.is_nan() || dof <= 0.0 || dof.is_infinite() {
        return Err(Error::param("dof", format!("{dof} must be finite and > 0")));
    }
    if t.is_nan() {
        return Err(Error::param("t", "must not be NaN"));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let half_tail = 0.5 * two_tailed_p(t, dof);
    Ok(if t >= 0.0 { half_tail } else { 1.0 - half_tail })
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(z)` for `z > 0` (Lanczos, g = 7, nine terms).
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // reflection keeps the series in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`. `one_minus_x` is passed
/// separately so callers can supply it without cancellation.
pub fn reg_inc_beta(x: f64, one_minus_x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * one_minus_x.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(one_minus_x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz evaluation.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
