//! Slow, obviously-correct reference implementations. Test code compares
//! the production algorithms against these; nothing here is used at runtime.

use std::collections::BTreeSet;

use ulcerbench_core::postprocess::Connectivity;
use ulcerbench_core::preprocess::{AugmentPlan, Q30};
use ulcerbench_core::rng::XorShift64Star;
use ulcerbench_core::{BBox, BinaryMask};

pub type PixelSet = BTreeSet<(u32, u32)>;

/// Connected foreground regions found by explicit-stack flood fill.
pub fn flood_fill_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<PixelSet> {
    let (h, w) = mask.dims();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let offsets: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut region = PixelSet::new();
            let mut stack = vec![(x, y)];
            seen[y * w + x] = true;
            while let Some((cx, cy)) = stack.pop() {
                region.insert((cx as u32, cy as u32));
                for &(dx, dy) in offsets {
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && !seen[ny * w + nx] {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            out.push(region);
        }
    }
    out
}

/// Tight half-open box around a non-empty pixel set.
pub fn enclosing_box(pixels: &PixelSet) -> BBox {
    let xmin = pixels.iter().map(|p| p.0).min().expect("non-empty");
    let xmax = pixels.iter().map(|p| p.0).max().expect("non-empty");
    let ymin = pixels.iter().map(|p| p.1).min().expect("non-empty");
    let ymax = pixels.iter().map(|p| p.1).max().expect("non-empty");
    BBox::new(xmin, ymin, xmax + 1, ymax + 1).expect("valid box")
}

/// IoU of two boxes by counting covered pixels one at a time.
pub fn iou_by_pixels(a: &BBox, b: &BBox) -> f64 {
    let x_end = a.xmax().max(b.xmax());
    let y_end = a.ymax().max(b.ymax());
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..y_end {
        for x in 0..x_end {
            let (ia, ib) = (a.contains(x, y), b.contains(x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy matching by pixel-counted IoU. Returns TP flags in rank order
/// (descending confidence, then `(ymin, xmin, ymax, xmax)`).
pub fn greedy_labels(dets: &[(BBox, f64)], gts: &[BBox], iou_threshold: f64) -> Vec<bool> {
    let mut ranked = dets.to_vec();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1).then_with(|| {
            (a.0.ymin(), a.0.xmin(), a.0.ymax(), a.0.xmax()).cmp(&(b.0.ymin(), b.0.xmin(), b.0.ymax(), b.0.xmax()))
        })
    });
    let mut free = vec![true; gts.len()];
    ranked
        .iter()
        .map(|(b, _)| {
            let ious: Vec<f64> = gts.iter().map(|g| iou_by_pixels(b, g)).collect();
            let mut best: Option<usize> = None;
            for (gi, &iou) in ious.iter().enumerate() {
                if free[gi] && iou >= iou_threshold && best.is_none_or(|bi| iou > ious[bi]) {
                    best = Some(gi);
                }
            }
            if let Some(gi) = best {
                free[gi] = false;
            }
            best.is_some()
        })
        .collect()
}

/// Average precision straight from the precision/recall table.
///
/// All-point: mean over recall levels `i / G` of the best precision reached
/// at any rank whose recall is at least that level. Eleven-point: mean over
/// `t / 10` of the same quantity. Recall comparisons use integer counts.
pub fn ap_from_pr_table(labels: &[bool], total_gt: usize, eleven_point: bool) -> f64 {
    if total_gt == 0 {
        return if labels.is_empty() { 1.0 } else { 0.0 };
    }
    let mut rows = Vec::new();
    let mut tp = 0usize;
    for (k, &is_tp) in labels.iter().enumerate() {
        tp += is_tp as usize;
        rows.push((tp, tp as f64 / (k + 1) as f64));
    }
    let best_at = |reached: &dyn Fn(usize) -> bool| {
        rows.iter()
            .filter(|(t, _)| reached(*t))
            .map(|&(_, p)| p)
            .fold(0.0, f64::max)
    };
    if eleven_point {
        (0..=10).map(|t| best_at(&|tp| tp * 10 >= t * total_gt)).sum::<f64>() / 11.0
    } else {
        (1..=total_gt).map(|i| best_at(&|tp| tp >= i)).sum::<f64>() / total_gt as f64
    }
}

/// Every TP/FP sequence of length `n`.
pub fn all_label_sequences(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}

/// Student-t density normalizing constant for integer `dof`, using
/// `Gamma((n+1)/2) / Gamma(n/2)` built from its two-step recurrence.
fn t_norm_const_integer(dof: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let mut ratio = if dof % 2 == 1 { 1.0 / pi.sqrt() } else { pi.sqrt() / 2.0 };
    let mut n = if dof % 2 == 1 { 1 } else { 2 };
    while n < dof {
        ratio *= (n + 1) as f64 / n as f64;
        n += 2;
    }
    ratio / (dof as f64 * pi).sqrt()
}

/// Upper tail `P(T > t)` by composite Simpson integration of the density
/// over `[0, |t|]`.
pub fn t_sf_by_integration(t: f64, dof: u32) -> f64 {
    let c = t_norm_const_integer(dof);
    let nu = dof as f64;
    let density = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let b = t.abs();
    let panels = 200_000usize;
    let h = b / panels as f64;
    let mut acc = density(0.0) + density(b);
    for i in 1..panels {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * density(i as f64 * h);
    }
    let central = acc * h / 3.0;
    if t >= 0.0 {
        0.5 - central
    } else {
        0.5 + central
    }
}

/// Source pixel of output `(x, y)` after the geometric part of `plan`,
/// traced backwards through each enabled stage; `None` means zero fill.
pub fn geometric_source(plan: &AugmentPlan, x: usize, y: usize) -> Option<(usize, usize)> {
    let (h, w) = (plan.height, plan.width);
    let (hf, wf) = (h as f64, w as f64);
    let inside = |px: f64, py: f64| px >= 0.0 && py >= 0.0 && px < wf && py < hf;
    let (mut px, mut py) = (x as f64, y as f64);

    if let Some(hm) = plan.perspective {
        let u = if w > 1 { px / (wf - 1.0) } else { 0.0 };
        let v = if h > 1 { py / (hf - 1.0) } else { 0.0 };
        let [a, b, c, d, e, f, g, hh] = hm.coeffs;
        let den = g * u + hh * v + 1.0;
        let (sx, sy) = ((a * u + b * v + c) / den, (d * u + e * v + f) / den);
        if !(sx.is_finite() && sy.is_finite()) {
            return None;
        }
        px = (sx + 0.5).floor();
        py = (sy + 0.5).floor();
        if !inside(px, py) {
            return None;
        }
    }
    if let Some(r) = plan.rotation {
        let (cos, sin) = (r.cos_q30 as f64 / Q30 as f64, r.sin_q30 as f64 / Q30 as f64);
        let (cx, cy) = ((wf - 1.0) / 2.0, (hf - 1.0) / 2.0);
        let (dx, dy) = (px - cx, py - cy);
        px = (cx + cos * dx + sin * dy + 0.5).floor();
        py = (cy - sin * dx + cos * dy + 0.5).floor();
        if !inside(px, py) {
            return None;
        }
    }
    if plan.vertical_flip {
        py = hf - 1.0 - py;
    }
    if plan.horizontal_flip {
        px = wf - 1.0 - px;
    }
    if let Some(c) = plan.crop {
        px = c.x0 as f64 + ((px + 0.5) * c.width as f64 / wf).floor();
        py = c.y0 as f64 + ((py + 0.5) * c.height as f64 / hf).floor();
    }
    inside(px, py).then_some((px as usize, py as usize))
}

/// Mask after the geometric part of `plan`, one output pixel at a time.
pub fn warp_mask_by_oracle(plan: &AugmentPlan, mask: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(plan.height, plan.width, |x, y| {
        geometric_source(plan, x, y).is_some_and(|(sx, sy)| mask.get(sx, sy))
    })
    .expect("plan dimensions are non-empty")
}

/// Mask with each pixel set with probability `density`.
pub fn random_mask(rng: &mut XorShift64Star, height: usize, width: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(height, width, |_, _| rng.bernoulli(density)).expect("non-empty grid")
}

/// Box inside a `size x size` canvas with sides of at least one pixel.
pub fn random_box(rng: &mut XorShift64Star, size: u32) -> BBox {
    let x0 = rng.int_inclusive(0, size as i64 - 1) as u32;
    let y0 = rng.int_inclusive(0, size as i64 - 1) as u32;
    let x1 = rng.int_inclusive(x0 as i64 + 1, size as i64) as u32;
    let y1 = rng.int_inclusive(y0 as i64 + 1, size as i64) as u32;
    BBox::new(x0, y0, x1, y1).expect("ordered corners")
}
