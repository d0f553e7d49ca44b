//! Probability map to bounding boxes.
//!
//! `detect` runs binarize -> connected components -> mean confidence ->
//! area/confidence filter and emits one detection per surviving region.
//! The default region thresholds are a mean confidence of 0.6 and an area
//! of 200 pixels, both inclusive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, BinaryMask, Detection, ProbMap};

pub const DEFAULT_MIN_MEAN_CONFIDENCE: f64 = 0.6;
pub const DEFAULT_MIN_AREA: u64 = 200;
pub const DEFAULT_PIXEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::param("connectivity", format!("{other} is not 4 or 8"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub pixel_threshold: f64,
    pub min_mean_confidence: f64,
    pub min_area: u64,
    pub connectivity: Connectivity,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            pixel_threshold: DEFAULT_PIXEL_THRESHOLD,
            min_mean_confidence: DEFAULT_MIN_MEAN_CONFIDENCE,
            min_area: DEFAULT_MIN_AREA,
            connectivity: Connectivity::Eight,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_threshold > 0.0 && self.pixel_threshold < 1.0) {
            return Err(Error::param(
                "pixel_threshold",
                format!("{} must lie in (0, 1)", self.pixel_threshold),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_mean_confidence) {
            return Err(Error::param(
                "min_mean_confidence",
                format!("{} must lie in [0, 1]", self.min_mean_confidence),
            ));
        }
        if self.min_area == 0 {
            return Err(Error::param("min_area", "must be >= 1"));
        }
        Ok(())
    }
}

/// A maximal connected set of foreground pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// `(x, y)` positions in row-major order.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
}

impl Component {
    pub fn area(&self) -> u64 {
        self.pixels.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
    pub mean_confidence: f64,
}

impl Region {
    pub fn area(&self) -> u64 {
        self.pixels.len() as u64
    }
}

pub fn binarize(map: &ProbMap, pixel_threshold: f64) -> BinaryMask {
    let values = map.values().iter().map(|&v| (v >= pixel_threshold) as u8).collect();
    BinaryMask::new(map.height(), map.width(), values).expect("dimensions come from a valid map")
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let next = parent[i as usize];
        parent[i as usize] = parent[next as usize];
        i = next;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass labelling with union-find over provisional labels.
///
/// Output is ordered by bbox `ymin`, then `xmin`, then area, then the first
/// pixel in row-major order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    let (h, w) = mask.dims();
    let px = mask.values();
    let mut labels = vec![0u32; h * w];
    // parent[0] is the background sentinel
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if px[i] == 0 {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut count = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbours[count] = l;
                    count += 1;
                }
            };
            if x > 0 {
                push(labels[i - 1]);
            }
            if y > 0 {
                push(labels[i - w]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(labels[i - w - 1]);
                    }
                    if x + 1 < w {
                        push(labels[i - w + 1]);
                    }
                }
            }
            labels[i] = if count == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let mut root = neighbours[0];
                for &n in &neighbours[1..count] {
                    root = union(&mut parent, root, n);
                }
                find(&mut parent, root)
            };
        }
    }

    // Second pass: resolve roots, collect pixels per component.
    let mut slot_of_root = vec![u32::MAX; parent.len()];
    let mut groups: Vec<Vec<(u32, u32)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let root = find(&mut parent, l) as usize;
            if slot_of_root[root] == u32::MAX {
                slot_of_root[root] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[slot_of_root[root] as usize].push((x as u32, y as u32));
        }
    }

    let mut components: Vec<Component> = groups
        .into_iter()
        .map(|pixels| {
            let (mut xmin, mut ymin, mut xmax, mut ymax) = (u32::MAX, u32::MAX, 0, 0);
            for &(x, y) in &pixels {
                xmin = xmin.min(x);
                ymin = ymin.min(y);
                xmax = xmax.max(x);
                ymax = ymax.max(y);
            }
            let bbox = BBox::new(xmin, ymin, xmax + 1, ymax + 1).expect("non-empty component");
            Component { pixels, bbox }
        })
        .collect();
    components.sort_by(|a, b| {
        (a.bbox.ymin(), a.bbox.xmin(), a.area())
            .cmp(&(b.bbox.ymin(), b.bbox.xmin(), b.area()))
            .then_with(|| (a.pixels[0].1, a.pixels[0].0).cmp(&(b.pixels[0].1, b.pixels[0].0)))
    });
    components
}

/// Arithmetic mean of the original map over the component's pixels. The
/// sum is correctly rounded, so a region of identical values `v` has mean
/// exactly `v` whenever `n * v` rounds to itself.
pub fn region_confidence(pixels: &[(u32, u32)], map: &ProbMap) -> Result<f64> {
    let (h, w) = map.dims();
    let mut sum = ExactSum::default();
    for &(x, y) in pixels {
        if x as usize >= w || y as usize >= h {
            return Err(Error::PixelOutOfBounds {
                x,
                y,
                height: h,
                width: w,
            });
        }
        sum.add(map.get(x as usize, y as usize));
    }
    if pixels.is_empty() {
        return Err(Error::param("region", "a region needs at least one pixel"));
    }
    Ok(sum.value() / pixels.len() as f64)
}

/// Shewchuk's exact summation over non-overlapping partials.
#[derive(Default)]
struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Correctly rounded total (round half to even).
    fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&last) = p.last() else { return 0.0 };
        let mut n = p.len() - 1;
        let mut hi = last;
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub fn to_region(component: Component, map: &ProbMap) -> Result<Region> {
    let mean_confidence = region_confidence(&component.pixels, map)?;
    Ok(Region {
        pixels: component.pixels,
        bbox: component.bbox,
        mean_confidence,
    })
}

/// Keeps regions meeting both thresholds (inclusive); order is preserved.
pub fn filter_regions(regions: Vec<Region>, config: &DetectConfig) -> Vec<Region> {
    regions
        .into_iter()
        .filter(|r| r.mean_confidence >= config.min_mean_confidence && r.area() >= config.min_area)
        .collect()
}

/// Full inference post-processing for one map.
pub fn detect_regions(map: &ProbMap, config: &DetectConfig) -> Vec<Region> {
    let mask = binarize(map, config.pixel_threshold);
    let regions = connected_components(&mask, config.connectivity)
        .into_iter()
        .map(|c| to_region(c, map).expect("components come from the same map"))
        .collect();
    filter_regions(regions, config)
}

/// Detections sorted by descending confidence, ties by `(ymin, xmin)`.
pub fn detect(map: &ProbMap, config: &DetectConfig) -> Vec<Detection> {
    let mut dets: Vec<Detection> = detect_regions(map, config)
        .into_iter()
        .map(|r| {
            // mean of values in [0, 1] stays in [0, 1] up to rounding
            Detection::new(r.bbox, r.mean_confidence.clamp(0.0, 1.0)).expect("confidence in range")
        })
        .collect();
    dets.sort_by(Detection::rank_cmp);
    dets
}
