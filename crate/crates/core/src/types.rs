//! Domain types shared across the toolkit.
//!
//! Grids are row-major with the origin at the top-left corner, `x` growing
//! rightward and `y` growing downward. Boxes are half-open:
//! `[xmin, xmax) x [ymin, ymax)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyGrid { height, width });
    }
    let expected = height.checked_mul(width).ok_or(Error::EmptyGrid { height, width })?;
    if expected != len {
        return Err(Error::LengthMismatch { expected, found: len });
    }
    Ok(())
}

/// Per-pixel confidence grid produced by a segmentation model's sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self { height, width, values })
    }

    /// Widens single-precision payloads (as stored on disk) to `f64`.
    pub fn from_f32(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        Self::new(height, width, values.iter().map(|&v| v as f64).collect())
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height.saturating_mul(width)])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(height.saturating_mul(width));
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Returns the mask when every value is exactly 0 or 1.
    pub fn to_binary_mask(&self) -> Option<BinaryMask> {
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Some(0u8)
                } else if v == 1.0 {
                    Some(1u8)
                } else {
                    None
                }
            })
            .collect::<Option<Vec<_>>>()?;
        Some(BinaryMask {
            height: self.height,
            width: self.width,
            values,
        })
    }
}

/// Per-pixel {0,1} grid: ground-truth labels or a binarized prediction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(Error::ValueOutOfRange {
                index,
                value: value as f64,
            });
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height.saturating_mul(width)])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut values = Vec::with_capacity(height.saturating_mul(width));
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y) as u8);
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_probmap(&self) -> ProbMap {
        ProbMap {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Ensures two grids share dimensions.
pub(crate) fn same_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch {
            left_h: left.0,
            left_w: left.1,
            right_h: right.0,
            right_w: right.1,
        });
    }
    Ok(())
}

/// Axis-aligned box in pixel coordinates, min inclusive and max exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BBox {
    xmin: u32,
    ymin: u32,
    xmax: u32,
    ymax: u32,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    xmin: u32,
    ymin: u32,
    xmax: u32,
    ymax: u32,
}

impl TryFrom<RawBox> for BBox {
    type Error = Error;

    fn try_from(r: RawBox) -> Result<Self> {
        BBox::new(r.xmin, r.ymin, r.xmax, r.ymax)
    }
}

impl From<BBox> for RawBox {
    fn from(b: BBox) -> Self {
        RawBox {
            xmin: b.xmin,
            ymin: b.ymin,
            xmax: b.xmax,
            ymax: b.ymax,
        }
    }
}

impl BBox {
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Result<Self> {
        if xmin >= xmax || ymin >= ymax {
            return Err(Error::InvalidBox { xmin, ymin, xmax, ymax });
        }
        Ok(Self { xmin, ymin, xmax, ymax })
    }

    pub fn xmin(&self) -> u32 {
        self.xmin
    }

    pub fn ymin(&self) -> u32 {
        self.ymin
    }

    pub fn xmax(&self) -> u32 {
        self.xmax
    }

    pub fn ymax(&self) -> u32 {
        self.ymax
    }

    pub fn width(&self) -> u32 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> u32 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    /// Overlap of two boxes, `None` when they share no pixel.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let xmin = self.xmin.max(other.xmin);
        let ymin = self.ymin.max(other.ymin);
        let xmax = self.xmax.min(other.xmax);
        let ymax = self.ymax.min(other.ymax);
        BBox::new(xmin, ymin, xmax, ymax).ok()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.xmin..self.xmax).contains(&x) && (self.ymin..self.ymax).contains(&y)
    }

    /// True when the box fits inside a `height x width` image.
    pub fn fits_within(&self, height: usize, width: usize) -> bool {
        self.xmax as usize <= width && self.ymax as usize <= height
    }
}

pub fn bbox_area(b: &BBox) -> u64 {
    b.area()
}

/// A scored box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::param("confidence", format!("{confidence} is outside [0, 1]")));
        }
        Ok(Self { bbox, confidence })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Descending confidence, then `(ymin, xmin, ymax, xmax)`.
    pub fn rank_cmp(&self, other: &Detection) -> std::cmp::Ordering {
        other
            .confidence
            .total_cmp(&self.confidence)
            .then_with(|| box_order_key(&self.bbox).cmp(&box_order_key(&other.bbox)))
    }
}

pub(crate) fn box_order_key(b: &BBox) -> (u32, u32, u32, u32) {
    (b.ymin, b.xmin, b.ymax, b.xmax)
}

/// Mixing weights of the composite segmentation loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha_sg: f64,
    pub beta_sg: f64,
    pub gamma_sg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_sg: 1.0,
            beta_sg: 1.0,
            gamma_sg: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(alpha_sg: f64, beta_sg: f64, gamma_sg: f64) -> Result<Self> {
        let w = Self {
            alpha_sg,
            beta_sg,
            gamma_sg,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_sg", self.alpha_sg),
            ("beta_sg", self.beta_sg),
            ("gamma_sg", self.gamma_sg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            alpha_sg: self.alpha_sg * k,
            beta_sg: self.beta_sg * k,
            gamma_sg: self.gamma_sg * k,
        }
    }
}

/// Parameters of the binary focal loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalParams {
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub clamp_delta: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            clamp_delta: 1e-7,
        }
    }
}

impl FocalParams {
    pub fn new(focal_alpha: f64, focal_gamma: f64, clamp_delta: f64) -> Result<Self> {
        let p = Self {
            focal_alpha,
            focal_gamma,
            clamp_delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(Error::param(
                "focal_alpha",
                format!("{} must lie in (0, 1)", self.focal_alpha),
            ));
        }
        if !(self.focal_gamma.is_finite() && self.focal_gamma >= 0.0) {
            return Err(Error::param(
                "focal_gamma",
                format!("{} must be finite and >= 0", self.focal_gamma),
            ));
        }
        if !(self.clamp_delta > 0.0 && self.clamp_delta < 1e-3) {
            return Err(Error::param(
                "clamp_delta",
                format!("{} must lie in (0, 1e-3)", self.clamp_delta),
            ));
        }
        Ok(())
    }
}

/// Smoothing constant added to the Dice and Jaccard ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SmoothEps(f64);

impl Default for SmoothEps {
    fn default() -> Self {
        Self(1e-6)
    }
}

impl SmoothEps {
    pub fn new(eps: f64) -> Result<Self> {
        let e = Self(eps);
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.0.is_finite() && self.0 > 0.0) {
            return Err(Error::param("eps", format!("{} must be finite and > 0", self.0)));
        }
        Ok(())
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}
