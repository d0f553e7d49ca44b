//! Pixel-level and detection-level evaluation.
//!
//! Detection scoring follows the usual single-class challenge protocol:
//! detections are matched greedily in descending confidence order, each to
//! the unmatched ground-truth box of highest IoU at or above the threshold.
//! Counts are pooled across the dataset and AP is computed over one global
//! ranking. With a single class, mAP equals AP.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{box_order_key, same_dims, BBox, BinaryMask, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApInterpolation {
    AllPoint,
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub ap_interpolation: ApInterpolation,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            ap_interpolation: ApInterpolation::AllPoint,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::param(
                "iou_threshold",
                format!("{} must lie in (0, 1]", self.iou_threshold),
            ));
        }
        Ok(())
    }
}

struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<Confusion> {
    same_dims(pred.dims(), gt.dims())?;
    let mut c = Confusion { tp: 0, fp: 0, fn_: 0 };
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        match (p, g) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => {}
        }
    }
    Ok(c)
}

/// `2TP / (2TP + FP + FN)`, or 1 when both masks are empty.
pub fn pixel_f1(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let c = confusion(pred, gt)?;
    let den = 2 * c.tp + c.fp + c.fn_;
    Ok(if den == 0 { 1.0 } else { (2 * c.tp) as f64 / den as f64 })
}

/// `|pred & gt| / |pred | gt|`, or 1 when both masks are empty.
pub fn pixel_iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let c = confusion(pred, gt)?;
    let union = c.tp + c.fp + c.fn_;
    Ok(if union == 0 { 1.0 } else { c.tp as f64 / union as f64 })
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    match a.intersection(b) {
        None => 0.0,
        Some(i) => {
            let inter = i.area();
            inter as f64 / (a.area() + b.area() - inter) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MatchLabel {
    Tp,
    Fp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// One label per input detection, aligned with the input order.
    pub labels: Vec<MatchLabel>,
    /// Ground-truth index claimed by each detection, if any.
    pub matched_gt: Vec<Option<usize>>,
    pub unmatched_gt: usize,
}

impl MatchOutcome {
    pub fn tp(&self) -> usize {
        self.labels.iter().filter(|&&l| l == MatchLabel::Tp).count()
    }

    pub fn fp(&self) -> usize {
        self.labels.len() - self.tp()
    }
}

/// Greedy matching. Detections are visited in rank order
/// (see [`Detection::rank_cmp`]) whatever order they are passed in.
/// IoU ties go to the lower ground-truth index.
pub fn match_detections(dets: &[Detection], gts: &[BBox], cfg: &MatchConfig) -> MatchOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[a].rank_cmp(&dets[b]));

    let mut taken = vec![false; gts.len()];
    let mut labels = vec![MatchLabel::Fp; dets.len()];
    let mut matched_gt = vec![None; dets.len()];
    for di in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let iou = box_iou(&dets[di].bbox, gt);
            if iou >= cfg.iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            labels[di] = MatchLabel::Tp;
            matched_gt[di] = Some(gi);
        }
    }
    let unmatched_gt = taken.iter().filter(|&&t| !t).count();
    MatchOutcome {
        labels,
        matched_gt,
        unmatched_gt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from pooled counts.
///
/// Precision is 0 without detections and recall is 1 without ground truth;
/// when there is neither, the image set is scored as perfect.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    if tp + fp == 0 && tp + fn_ == 0 {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf { precision, recall, f1 }
}

pub fn detection_prf(dets: &[Detection], gts: &[BBox], cfg: &MatchConfig) -> Prf {
    let m = match_detections(dets, gts, cfg);
    prf_from_counts(m.tp(), m.fp(), m.unmatched_gt)
}

/// Average precision of a ranked list of TP (`true`) / FP (`false`) labels.
///
/// All-point AP integrates the precision envelope `max_{r' >= r} P(r')`
/// over recall; 11-point AP averages the envelope at recall 0, 0.1, ..., 1.
/// With no ground truth, AP is 1 for an empty ranking and 0 otherwise.
pub fn average_precision(ranked_tp: &[bool], total_gt: usize, interpolation: ApInterpolation) -> f64 {
    if total_gt == 0 {
        return if ranked_tp.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut tp_counts = Vec::with_capacity(ranked_tp.len());
    let mut precision = Vec::with_capacity(ranked_tp.len());
    for (k, &is_tp) in ranked_tp.iter().enumerate() {
        tp += is_tp as usize;
        tp_counts.push(tp);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    let mut envelope = precision;
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    match interpolation {
        ApInterpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_tp = 0usize;
            for (k, &t) in tp_counts.iter().enumerate() {
                if t > prev_tp {
                    ap += (t - prev_tp) as f64 / total_gt as f64 * envelope[k];
                    prev_tp = t;
                }
            }
            ap
        }
        ApInterpolation::ElevenPoint => {
            let sum: f64 = (0..=10usize)
                .map(|r| {
                    // first rank whose recall reaches r/10; the envelope is non-increasing
                    tp_counts
                        .iter()
                        .position(|&t| t * 10 >= r * total_gt)
                        .map_or(0.0, |k| envelope[k])
                })
                .sum();
            sum / 11.0
        }
    }
}

/// Predicted and ground-truth masks for pixel metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub pred: BinaryMask,
    pub gt: BinaryMask,
}

/// Everything known about one image for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub image_id: String,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<BBox>,
    pub masks: Option<MaskPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub image_id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pixel_f1: Option<f64>,
    pub pixel_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub total_gt: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub det_precision: f64,
    pub det_recall: f64,
    pub det_f1: f64,
    pub ap: f64,
    pub map: f64,
    pub pixel_f1: Option<f64>,
    pub pixel_iou: Option<f64>,
    pub per_image: Vec<ImageReport>,
}

/// Pooled detection metrics plus per-image averaged pixel metrics.
pub fn evaluate_dataset(images: &[ImageEval], cfg: &MatchConfig) -> Result<EvalReport> {
    if images.is_empty() {
        return Err(Error::NoImages);
    }
    cfg.validate()?;
    let mut seen = HashSet::new();
    for img in images {
        if !seen.insert(img.image_id.as_str()) {
            return Err(Error::DuplicateImage(img.image_id.clone()));
        }
    }

    // (confidence, image_id, box, is_tp) for the global ranking
    let mut ranked: Vec<(f64, &str, BBox, bool)> = Vec::new();
    let mut per_image = Vec::with_capacity(images.len());
    let (mut tp, mut fp, mut fn_, mut total_gt) = (0, 0, 0, 0);
    let (mut f1_sum, mut iou_sum, mut mask_count) = (0.0, 0.0, 0usize);

    for img in images {
        let m = match_detections(&img.detections, &img.ground_truth, cfg);
        for (det, label) in img.detections.iter().zip(&m.labels) {
            ranked.push((det.confidence(), &img.image_id, det.bbox, *label == MatchLabel::Tp));
        }
        let (itp, ifp) = (m.tp(), m.fp());
        tp += itp;
        fp += ifp;
        fn_ += m.unmatched_gt;
        total_gt += img.ground_truth.len();

        let (pf1, piou) = match &img.masks {
            Some(pair) => {
                let f = pixel_f1(&pair.pred, &pair.gt)?;
                let i = pixel_iou(&pair.pred, &pair.gt)?;
                f1_sum += f;
                iou_sum += i;
                mask_count += 1;
                (Some(f), Some(i))
            }
            None => (None, None),
        };
        per_image.push(ImageReport {
            image_id: img.image_id.clone(),
            tp: itp,
            fp: ifp,
            fn_: m.unmatched_gt,
            pixel_f1: pf1,
            pixel_iou: piou,
        });
    }

    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| box_order_key(&a.2).cmp(&box_order_key(&b.2)))
    });
    let labels: Vec<bool> = ranked.iter().map(|r| r.3).collect();
    let ap = average_precision(&labels, total_gt, cfg.ap_interpolation);
    let prf = prf_from_counts(tp, fp, fn_);
    per_image.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    Ok(EvalReport {
        images: images.len(),
        total_gt,
        tp,
        fp,
        fn_,
        det_precision: prf.precision,
        det_recall: prf.recall,
        det_f1: prf.f1,
        ap,
        map: ap,
        pixel_f1: (mask_count > 0).then(|| f1_sum / mask_count as f64),
        pixel_iou: (mask_count > 0).then(|| iou_sum / mask_count as f64),
        per_image,
    })
}
