//! Input preparation: intensity normalization and a seeded augmentation
//! pipeline that keeps image and mask geometrically aligned.
//!
//! Augmentation is split into [`plan`], which draws every random parameter
//! from a [`XorShift64Star`] stream, and [`apply_plan`], which is a pure
//! function of the plan and the inputs. Photometric transforms run first and
//! touch only the image; geometric transforms then resample image and mask
//! with nearest-neighbour lookup, filling pixels that map outside the source
//! with zeros. The canvas keeps the input dimensions.
//!
//! Geometry is integer or IEEE add/multiply/divide only; the one
//! transcendental step (the rotation's sine and cosine) is rounded to Q30
//! fixed point before use, so outputs are reproducible across platforms.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;
use crate::types::{same_dims, BinaryMask};

/// 8-bit RGB image, interleaved row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid { height, width });
        }
        let expected = height * width * 3;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(height, width, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    pub channel_means: [f64; 3],
    pub channel_stds: [f64; 3],
    pub apply_std: bool,
}

impl Default for NormConfig {
    /// Conventional ImageNet channel statistics.
    fn default() -> Self {
        Self {
            channel_means: [0.485, 0.456, 0.406],
            channel_stds: [0.229, 0.224, 0.225],
            apply_std: false,
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        for &m in &self.channel_means {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::param("channel_means", format!("{m} must lie in [0, 1)")));
            }
        }
        for &s in &self.channel_stds {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::param("channel_stds", format!("{s} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Float channel planes after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub height: usize,
    pub width: usize,
    pub planes: [Vec<f64>; 3],
}

/// `v / 255 - mean_c`, divided by `std_c` when `apply_std` is set.
pub fn normalize(img: &RgbImage, cfg: &NormConfig) -> NormalizedImage {
    let planes = std::array::from_fn(|c| {
        img.data
            .chunks_exact(3)
            .map(|px| {
                let v = px[c] as f64 / 255.0 - cfg.channel_means[c];
                if cfg.apply_std {
                    v / cfg.channel_stds[c]
                } else {
                    v
                }
            })
            .collect()
    });
    NormalizedImage {
        height: img.height,
        width: img.width,
        planes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, name: &'static str, lo: f64, hi: f64) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::param(
                name,
                format!("range [{}, {}] is not ordered", self.min, self.max),
            ));
        }
        if self.min < lo || self.max > hi {
            return Err(Error::param(
                name,
                format!("range [{}, {}] must lie within [{lo}, {hi}]", self.min, self.max),
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut XorShift64Star) -> f64 {
        rng.uniform(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggle<T> {
    pub enabled: bool,
    #[serde(flatten)]
    pub params: T,
}

impl<T> Toggle<T> {
    const fn on(params: T) -> Self {
        Self { enabled: true, params }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HueSaturation {
    /// Hue rotation in degrees.
    pub hue: Range,
    /// Multiplicative saturation factor.
    pub saturation: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlurRadius {
    pub min_radius: u32,
    pub max_radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probability {
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeParams {
    pub range: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Contrast factor around mid-grey.
    pub contrast: Toggle<RangeParams>,
    /// Additive brightness offset in intensity units.
    pub brightness: Toggle<RangeParams>,
    /// Standard deviation of additive noise in intensity units.
    pub gaussian_noise: Toggle<RangeParams>,
    /// Box-blur radius in pixels.
    pub blur: Toggle<BlurRadius>,
    /// Maximum corner displacement as a fraction of width/height.
    pub perspective: Toggle<RangeParams>,
    pub hue_saturation: Toggle<HueSaturation>,
    /// Crop side length as a fraction of the input side.
    pub crop: Toggle<RangeParams>,
    pub horizontal_flip: Toggle<Probability>,
    pub vertical_flip: Toggle<Probability>,
    /// Rotation angle in degrees, positive is clockwise on screen.
    pub rotation: Toggle<RangeParams>,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let r = |min, max| RangeParams {
            range: Range::new(min, max),
        };
        Self {
            contrast: Toggle::on(r(0.9, 1.1)),
            brightness: Toggle::on(r(-20.0, 20.0)),
            gaussian_noise: Toggle::on(r(0.0, 5.0)),
            blur: Toggle::on(BlurRadius {
                min_radius: 0,
                max_radius: 1,
            }),
            perspective: Toggle::on(r(0.0, 0.05)),
            hue_saturation: Toggle::on(HueSaturation {
                hue: Range::new(-10.0, 10.0),
                saturation: Range::new(0.9, 1.1),
            }),
            crop: Toggle::on(r(0.8, 1.0)),
            horizontal_flip: Toggle::on(Probability { probability: 0.5 }),
            vertical_flip: Toggle::on(Probability { probability: 0.5 }),
            rotation: Toggle::on(r(-15.0, 15.0)),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every transform disabled.
    pub fn identity() -> Self {
        let mut cfg = Self::default();
        cfg.contrast.enabled = false;
        cfg.brightness.enabled = false;
        cfg.gaussian_noise.enabled = false;
        cfg.blur.enabled = false;
        cfg.perspective.enabled = false;
        cfg.hue_saturation.enabled = false;
        cfg.crop.enabled = false;
        cfg.horizontal_flip.enabled = false;
        cfg.vertical_flip.enabled = false;
        cfg.rotation.enabled = false;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.contrast.params.range.check("contrast", 0.0, 10.0)?;
        self.brightness.params.range.check("brightness", -255.0, 255.0)?;
        self.gaussian_noise.params.range.check("gaussian_noise", 0.0, 255.0)?;
        if self.blur.params.min_radius > self.blur.params.max_radius {
            return Err(Error::param("blur", "min_radius exceeds max_radius"));
        }
        self.perspective.params.range.check("perspective", 0.0, 0.5)?;
        self.hue_saturation.params.hue.check("hue", -180.0, 180.0)?;
        self.hue_saturation.params.saturation.check("saturation", 0.0, 10.0)?;
        self.crop.params.range.check("crop", 0.0, 1.0)?;
        if self.crop.params.range.min <= 0.0 {
            return Err(Error::param("crop", "fractions must be > 0"));
        }
        for (name, p) in [
            ("horizontal_flip", self.horizontal_flip.params.probability),
            ("vertical_flip", self.vertical_flip.params.probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("probability {p} outside [0, 1]")));
            }
        }
        self.rotation.params.range.check("rotation", -360.0, 360.0)
    }
}

/// Source window of a crop, rescaled to the full canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CropWindow {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

pub const Q30: i64 = 1 << 30;

/// Rotation about the canvas centre with Q30 fixed-point cosine and sine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rotation {
    pub cos_q30: i64,
    pub sin_q30: i64,
}

impl Rotation {
    pub fn from_degrees(deg: f64) -> Self {
        let rad = deg.to_radians();
        Self {
            cos_q30: (rad.cos() * Q30 as f64).round() as i64,
            sin_q30: (rad.sin() * Q30 as f64).round() as i64,
        }
    }
}

/// Projective map from output pixel coordinates, normalized to the unit
/// square, onto a source quadrilateral:
/// `x = (a u + b v + c) / (g u + h v + 1)`, `y = (d u + e v + f) / (g u + h v + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Homography {
    pub coeffs: [f64; 8],
}

impl Homography {
    /// Unit square corners (0,0), (1,0), (1,1), (0,1) onto `quad`.
    pub fn square_to_quad(quad: [(f64, f64); 4]) -> Self {
        let [(x0, y0), (x1, y1), (x2, y2), (x3, y3)] = quad;
        let sx = x0 - x1 + x2 - x3;
        let sy = y0 - y1 + y2 - y3;
        let (g, h) = if sx == 0.0 && sy == 0.0 {
            (0.0, 0.0)
        } else {
            let dx1 = x1 - x2;
            let dx2 = x3 - x2;
            let dy1 = y1 - y2;
            let dy2 = y3 - y2;
            let den = dx1 * dy2 - dx2 * dy1;
            ((sx * dy2 - dx2 * sy) / den, (dx1 * sy - sx * dy1) / den)
        };
        let a = x1 - x0 + g * x1;
        let b = x3 - x0 + h * x3;
        let d = y1 - y0 + g * y1;
        let e = y3 - y0 + h * y3;
        Self {
            coeffs: [a, b, x0, d, e, y0, g, h],
        }
    }

    pub fn map(&self, u: f64, v: f64) -> (f64, f64) {
        let [a, b, c, d, e, f, g, h] = self.coeffs;
        let w = g * u + h * v + 1.0;
        ((a * u + b * v + c) / w, (d * u + e * v + f) / w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HueSatShift {
    pub hue_degrees: f64,
    pub saturation: f64,
}

/// Every random draw of one augmentation, in application order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentPlan {
    pub height: usize,
    pub width: usize,
    pub contrast: Option<f64>,
    pub brightness: Option<f64>,
    pub hue_saturation: Option<HueSatShift>,
    pub blur_radius: Option<u32>,
    pub noise_sigma: Option<f64>,
    pub noise_seed: u64,
    pub crop: Option<CropWindow>,
    pub horizontal_flip: bool,
    pub vertical_flip: bool,
    pub rotation: Option<Rotation>,
    pub perspective: Option<Homography>,
}

impl AugmentPlan {
    pub fn is_identity(&self) -> bool {
        self.contrast.is_none()
            && self.brightness.is_none()
            && self.hue_saturation.is_none()
            && self.blur_radius.is_none()
            && self.noise_sigma.is_none()
            && self.crop.is_none()
            && !self.horizontal_flip
            && !self.vertical_flip
            && self.rotation.is_none()
            && self.perspective.is_none()
    }
}

/// Draws the random parameters for one `height x width` input.
pub fn plan(cfg: &AugmentConfig, seed: u64, height: usize, width: usize) -> Result<AugmentPlan> {
    cfg.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::EmptyGrid { height, width });
    }
    let mut rng = XorShift64Star::new(seed);
    let contrast = cfg.contrast.enabled.then(|| cfg.contrast.params.range.sample(&mut rng));
    let brightness = cfg
        .brightness
        .enabled
        .then(|| cfg.brightness.params.range.sample(&mut rng));
    let hue_saturation = cfg.hue_saturation.enabled.then(|| HueSatShift {
        hue_degrees: cfg.hue_saturation.params.hue.sample(&mut rng),
        saturation: cfg.hue_saturation.params.saturation.sample(&mut rng),
    });
    let blur_radius = cfg
        .blur
        .enabled
        .then(|| rng.int_inclusive(cfg.blur.params.min_radius as i64, cfg.blur.params.max_radius as i64) as u32);
    let noise_sigma = cfg
        .gaussian_noise
        .enabled
        .then(|| cfg.gaussian_noise.params.range.sample(&mut rng));
    let noise_seed = rng.next_u64();

    let crop = if cfg.crop.enabled {
        let fw = cfg.crop.params.range.sample(&mut rng);
        let fh = cfg.crop.params.range.sample(&mut rng);
        let cw = (fw * width as f64).floor() as usize;
        let ch = (fh * height as f64).floor() as usize;
        if cw == 0 || ch == 0 {
            return Err(Error::DegenerateCrop(format!(
                "fractions ({fw}, {fh}) leave an empty window on a {height}x{width} input"
            )));
        }
        let x0 = rng.int_inclusive(0, (width - cw) as i64) as usize;
        let y0 = rng.int_inclusive(0, (height - ch) as i64) as usize;
        Some(CropWindow {
            x0,
            y0,
            width: cw,
            height: ch,
        })
    } else {
        None
    };
    let horizontal_flip = cfg.horizontal_flip.enabled && rng.bernoulli(cfg.horizontal_flip.params.probability);
    let vertical_flip = cfg.vertical_flip.enabled && rng.bernoulli(cfg.vertical_flip.params.probability);
    let rotation = cfg
        .rotation
        .enabled
        .then(|| Rotation::from_degrees(cfg.rotation.params.range.sample(&mut rng)));
    let perspective = cfg.perspective.enabled.then(|| {
        let jitter = cfg.perspective.params.range.sample(&mut rng);
        let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
        let mut corner = |cx: f64, cy: f64| {
            (
                cx + rng.uniform(-jitter, jitter) * wmax,
                cy + rng.uniform(-jitter, jitter) * hmax,
            )
        };
        Homography::square_to_quad([
            corner(0.0, 0.0),
            corner(wmax, 0.0),
            corner(wmax, hmax),
            corner(0.0, hmax),
        ])
    });

    Ok(AugmentPlan {
        height,
        width,
        contrast,
        brightness,
        hue_saturation,
        blur_radius,
        noise_sigma,
        noise_seed,
        crop,
        horizontal_flip,
        vertical_flip,
        rotation,
        perspective,
    })
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_channels(img: &mut RgbImage, f: impl Fn(f64) -> f64) {
    for v in img.data.iter_mut() {
        *v = to_u8(f(*v as f64));
    }
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h.rem_euclid(360.0), s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - ((hp.rem_euclid(2.0)) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn shift_hue_saturation(img: &mut RgbImage, shift: HueSatShift) {
    for px in img.data.chunks_exact_mut(3) {
        let (h, s, v) = rgb_to_hsv([px[0] as f64, px[1] as f64, px[2] as f64]);
        let h = (h + shift.hue_degrees).rem_euclid(360.0);
        let s = (s * shift.saturation).clamp(0.0, 1.0);
        let rgb = hsv_to_rgb(h, s, v);
        for (dst, v) in px.iter_mut().zip(rgb) {
            *dst = to_u8(v);
        }
    }
}

fn box_blur(img: &RgbImage, radius: u32) -> RgbImage {
    if radius == 0 {
        return img.clone();
    }
    let (h, w) = img.dims();
    let r = radius as i64;
    let mut out = img.clone();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut sum = [0u64; 3];
            let mut count = 0u64;
            for sy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                for sx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                    let p = img.pixel(sx as usize, sy as usize);
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                    count += 1;
                }
            }
            let i = (y as usize * w + x as usize) * 3;
            for (c, s) in sum.iter().enumerate() {
                out.data[i + c] = ((2 * s + count) / (2 * count)) as u8;
            }
        }
    }
    out
}

fn add_noise(img: &mut RgbImage, sigma: f64, seed: u64) {
    let mut rng = XorShift64Star::new(seed);
    for v in img.data.iter_mut() {
        *v = to_u8(*v as f64 + sigma * rng.standard_normal());
    }
}

/// Rounds half up: `floor(v + 0.5)`.
fn nearest(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// One geometric stage as an inverse map from destination to source pixel.
enum Stage {
    Crop(CropWindow),
    FlipH,
    FlipV,
    Rotate(Rotation),
    Perspective(Homography),
}

impl Stage {
    fn source(&self, x: usize, y: usize, h: usize, w: usize) -> Option<(usize, usize)> {
        let (sx, sy) = match self {
            Stage::Crop(c) => (
                (c.x0 + (2 * x + 1) * c.width / (2 * w)) as i64,
                (c.y0 + (2 * y + 1) * c.height / (2 * h)) as i64,
            ),
            Stage::FlipH => ((w - 1 - x) as i64, y as i64),
            Stage::FlipV => (x as i64, (h - 1 - y) as i64),
            Stage::Rotate(r) => {
                // doubled coordinates keep the half-pixel centre integral
                let dx = 2 * x as i64 - (w as i64 - 1);
                let dy = 2 * y as i64 - (h as i64 - 1);
                let nx = r.cos_q30 * dx + r.sin_q30 * dy + (w as i64 - 1) * Q30;
                let ny = -r.sin_q30 * dx + r.cos_q30 * dy + (h as i64 - 1) * Q30;
                ((nx + Q30).div_euclid(2 * Q30), (ny + Q30).div_euclid(2 * Q30))
            }
            Stage::Perspective(hm) => {
                let u = if w > 1 { x as f64 / (w - 1) as f64 } else { 0.0 };
                let v = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
                let (fx, fy) = hm.map(u, v);
                if !(fx.is_finite() && fy.is_finite()) {
                    return None;
                }
                (nearest(fx), nearest(fy))
            }
        };
        ((0..w as i64).contains(&sx) && (0..h as i64).contains(&sy)).then_some((sx as usize, sy as usize))
    }
}

fn warp(img: &RgbImage, mask: &BinaryMask, stage: &Stage) -> (RgbImage, BinaryMask) {
    let (h, w) = img.dims();
    let mut data = vec![0u8; h * w * 3];
    let mut mvals = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            if let Some((sx, sy)) = stage.source(x, y, h, w) {
                let i = y * w + x;
                let j = sy * w + sx;
                data[3 * i..3 * i + 3].copy_from_slice(&img.data[3 * j..3 * j + 3]);
                mvals[i] = mask.values()[j];
            }
        }
    }
    (
        RgbImage {
            height: h,
            width: w,
            data,
        },
        BinaryMask::new(h, w, mvals).expect("warp preserves dimensions and values"),
    )
}

pub fn apply_plan(p: &AugmentPlan, img: &RgbImage, mask: &BinaryMask) -> Result<(RgbImage, BinaryMask)> {
    same_dims(img.dims(), mask.dims())?;
    same_dims(img.dims(), (p.height, p.width))?;

    let mut out = img.clone();
    if let Some(c) = p.contrast {
        map_channels(&mut out, |v| (v - 127.5) * c + 127.5);
    }
    if let Some(b) = p.brightness {
        map_channels(&mut out, |v| v + b);
    }
    if let Some(shift) = p.hue_saturation {
        shift_hue_saturation(&mut out, shift);
    }
    if let Some(r) = p.blur_radius {
        out = box_blur(&out, r);
    }
    if let Some(sigma) = p.noise_sigma {
        add_noise(&mut out, sigma, p.noise_seed);
    }

    let mut stages = Vec::new();
    if let Some(c) = p.crop {
        stages.push(Stage::Crop(c));
    }
    if p.horizontal_flip {
        stages.push(Stage::FlipH);
    }
    if p.vertical_flip {
        stages.push(Stage::FlipV);
    }
    if let Some(r) = p.rotation {
        stages.push(Stage::Rotate(r));
    }
    if let Some(hm) = p.perspective {
        stages.push(Stage::Perspective(hm));
    }
    let mut out_mask = mask.clone();
    for stage in &stages {
        (out, out_mask) = warp(&out, &out_mask, stage);
    }
    Ok((out, out_mask))
}

/// Seeded augmentation of an image and its mask.
pub fn augment(img: &RgbImage, mask: &BinaryMask, cfg: &AugmentConfig, seed: u64) -> Result<(RgbImage, BinaryMask)> {
    same_dims(img.dims(), mask.dims())?;
    let p = plan(cfg, seed, img.height(), img.width())?;
    apply_plan(&p, img, mask)
}

/// First 16 bytes of SHA-256 over the canonical JSON of `(cfg, seed)`,
/// rendered as 32 lowercase hex characters.
pub fn pipeline_signature(cfg: &AugmentConfig, seed: u64) -> String {
    let canonical = serde_json::json!({ "config": cfg, "seed": seed });
    digest_hex(canonical.to_string().as_bytes())
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(16)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize) -> RgbImage {
        RgbImage::from_fn(h, w, |x, y| [(x * 10) as u8, (y * 20) as u8, ((x + y) * 5) as u8]).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let img = RgbImage::new(1, 2, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let n = normalize(&img, &NormConfig::default());
        assert!((n.planes[0][0] + 0.485).abs() < 1e-15);
        assert!((n.planes[0][1] - 0.515).abs() < 1e-15);
        let zero = NormConfig {
            channel_means: [0.0; 3],
            ..Default::default()
        };
        let n = normalize(&RgbImage::new(1, 1, vec![51, 102, 255]).unwrap(), &zero);
        assert_eq!(n.planes[0][0], 51.0 / 255.0);
        assert_eq!(n.planes[2][0], 1.0);
        let with_std = NormConfig {
            apply_std: true,
            ..Default::default()
        };
        let n = normalize(&img, &with_std);
        assert!((n.planes[1][0] - (-0.456 / 0.224)).abs() < 1e-15);
    }

    #[test]
    fn identity_pipeline_is_exact() {
        let img = gradient_image(5, 7);
        let mask = BinaryMask::from_fn(5, 7, |x, y| x > y).unwrap();
        let p = plan(&AugmentConfig::identity(), 3, 5, 7).unwrap();
        assert!(p.is_identity());
        let (i2, m2) = augment(&img, &mask, &AugmentConfig::identity(), 3).unwrap();
        assert_eq!(i2, img);
        assert_eq!(m2, mask);
    }

    #[test]
    fn rotation_quarter_turn() {
        // 4 rows x 6 columns, single pixel at (x=1, y=0)
        let mask = BinaryMask::from_fn(4, 6, |x, y| (x, y) == (1, 0)).unwrap();
        let img = RgbImage::from_fn(4, 6, |_, _| [200, 200, 200]).unwrap();
        let mut cfg = AugmentConfig::identity();
        cfg.rotation.enabled = true;
        cfg.rotation.params.range = Range::new(90.0, 90.0);
        let (ri, rm) = augment(&img, &mask, &cfg, 0).unwrap();
        let on: Vec<(usize, usize)> = (0..4)
            .flat_map(|y| (0..6).map(move |x| (x, y)))
            .filter(|&(x, y)| rm.get(x, y))
            .collect();
        assert_eq!(on, vec![(4, 0)]);
        // columns 0 and 5 fall outside the rotated 4-wide source: zero padded
        for y in 0..4 {
            assert_eq!(ri.pixel(0, y), [0, 0, 0]);
            assert_eq!(ri.pixel(5, y), [0, 0, 0]);
            assert_eq!(ri.pixel(2, y), [200, 200, 200]);
        }
    }

    #[test]
    fn double_flip_restores() {
        let img = gradient_image(6, 9);
        let mask = BinaryMask::from_fn(6, 9, |x, y| (x * y) % 3 == 0).unwrap();
        let mut cfg = AugmentConfig::identity();
        cfg.horizontal_flip.enabled = true;
        cfg.horizontal_flip.params.probability = 1.0;
        let (i1, m1) = augment(&img, &mask, &cfg, 11).unwrap();
        assert_ne!(i1, img);
        let (i2, m2) = augment(&i1, &m1, &cfg, 11).unwrap();
        assert_eq!((i2, m2), (img, mask));
    }

    #[test]
    fn photometric_leaves_mask_alone() {
        let img = gradient_image(8, 8);
        let mask = BinaryMask::from_fn(8, 8, |x, _| x < 3).unwrap();
        let mut cfg = AugmentConfig::default();
        for t in [
            &mut cfg.crop.enabled,
            &mut cfg.rotation.enabled,
            &mut cfg.perspective.enabled,
        ] {
            *t = false;
        }
        cfg.horizontal_flip.enabled = false;
        cfg.vertical_flip.enabled = false;
        let (_, m) = augment(&img, &mask, &cfg, 5).unwrap();
        assert_eq!(m, mask);
    }

    #[test]
    fn hsv_round_trip() {
        for rgb in [
            [0.0, 0.0, 0.0],
            [255.0, 0.0, 0.0],
            [12.0, 200.0, 77.0],
            [90.0, 90.0, 200.0],
        ] {
            let (h, s, v) = rgb_to_hsv(rgb);
            let back = hsv_to_rgb(h, s, v);
            for c in 0..3 {
                assert!((back[c] - rgb[c]).abs() < 1e-9, "{rgb:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn homography_hits_corners() {
        let quad = [(1.0, 2.0), (30.0, -1.0), (33.0, 20.0), (-2.0, 18.0)];
        let hm = Homography::square_to_quad(quad);
        for ((u, v), (qx, qy)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].into_iter().zip(quad) {
            let (x, y) = hm.map(u, v);
            assert!((x - qx).abs() < 1e-9 && (y - qy).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_crop_rejected() {
        let mut cfg = AugmentConfig::identity();
        cfg.crop.enabled = true;
        cfg.crop.params.range = Range::new(0.1, 0.2);
        assert!(matches!(plan(&cfg, 0, 3, 3), Err(Error::DegenerateCrop(_))));
        cfg.crop.params.range = Range::new(0.0, 0.2);
        assert!(plan(&cfg, 0, 30, 30).is_err());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let img = gradient_image(4, 4);
        let mask = BinaryMask::zeros(4, 5).unwrap();
        assert!(augment(&img, &mask, &AugmentConfig::default(), 0).is_err());
    }

    #[test]
    fn signature_format() {
        let cfg = AugmentConfig::default();
        let a = pipeline_signature(&cfg, 1);
        assert_eq!(a, pipeline_signature(&cfg, 1));
        assert_ne!(a, pipeline_signature(&cfg, 2));
        assert_eq!(a.len(), 32);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn config_validation() {
        let mut cfg = AugmentConfig::default();
        cfg.contrast.params.range = Range::new(1.2, 0.8);
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.vertical_flip.params.probability = 1.5;
        assert!(cfg.validate().is_err());
    }
}
