//! Dataset-level scoring shared by the offline evaluator and the service.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{DetectionTable, GroundTruthTable};
use crate::metrics::{evaluate_dataset, EvalReport, ImageEval, MaskPair, MatchConfig};

/// Evaluation plus the non-fatal findings made while assembling it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

/// Aggregate scores returned for a blind submission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubmissionScore {
    pub f1: f64,
    pub map: f64,
}

/// Builds the per-image evaluation set.
///
/// Every ground-truth image takes part, with or without detections.
/// Detections for image ids unknown to the ground truth are scored as false
/// positives on an image without wounds, and each such id yields a warning.
/// Masks must refer to ground-truth images.
pub fn assemble(
    detections: &DetectionTable,
    gt: &GroundTruthTable,
    masks: Option<BTreeMap<String, MaskPair>>,
) -> Result<(Vec<ImageEval>, Vec<String>)> {
    let mut masks = masks.unwrap_or_default();
    if let Some(id) = masks.keys().find(|id| !gt.images().contains_key(*id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    let mut warnings = Vec::new();
    let mut images: Vec<ImageEval> = gt
        .images()
        .iter()
        .map(|(id, boxes)| ImageEval {
            image_id: id.clone(),
            detections: detections.by_image().get(id).cloned().unwrap_or_default(),
            ground_truth: boxes.clone(),
            masks: masks.remove(id),
        })
        .collect();
    for (id, dets) in detections.by_image() {
        if gt.images().contains_key(id) {
            continue;
        }
        warnings.push(format!(
            "{} detection(s) reference unknown image `{id}`; counted as false positives",
            dets.len()
        ));
        images.push(ImageEval {
            image_id: id.clone(),
            detections: dets.clone(),
            ground_truth: Vec::new(),
            masks: None,
        });
    }
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok((images, warnings))
}

pub fn evaluate_tables(
    detections: &DetectionTable,
    gt: &GroundTruthTable,
    masks: Option<BTreeMap<String, MaskPair>>,
    cfg: &MatchConfig,
) -> Result<Scored> {
    let (images, warnings) = assemble(detections, gt, masks)?;
    let report = evaluate_dataset(&images, cfg)?;
    Ok(Scored { report, warnings })
}

/// F1 and mAP of a submission against hidden ground truth.
pub fn score_submission(
    detections: &DetectionTable,
    gt: &GroundTruthTable,
    cfg: &MatchConfig,
) -> Result<SubmissionScore> {
    let scored = evaluate_tables(detections, gt, None, cfg)?;
    Ok(SubmissionScore {
        f1: scored.report.det_f1,
        map: scored.report.map,
    })
}
