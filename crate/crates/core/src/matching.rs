//! Greedy detection-to-ground-truth matching on a single image.
//!
//! Matching follows the COCO evaluator's semantics: detections are visited in
//! descending score order (ties broken by input position), and each detection
//! claims the not-yet-claimed ground-truth box of the same category with the
//! highest IoU, provided that IoU reaches the threshold. Earlier (higher
//! scored) detections therefore win contested ground truth even if a later
//! detection would overlap it more tightly.
//!
//! The output partitions both input lists exactly: every detection is a true
//! positive or a false positive, every ground-truth box is claimed once or
//! counted as a false negative.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One predicted box from one model on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Opaque image identifier; compared verbatim.
    pub image_id: String,
    pub bbox: BBox,
    /// Confidence in `[0, 1]`.
    pub score: f64,
    /// Category identifier; matching never crosses categories.
    pub category: i64,
    /// Producing model, or `None` for freshly fused boxes.
    pub model_id: Option<String>,
}

/// One annotated box on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub bbox: BBox,
    pub category: i64,
}

/// A matched detection / ground-truth pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePositive {
    /// Index into the detection slice passed to [`match_detections`].
    pub detection: usize,
    /// Index into the ground-truth slice.
    pub ground_truth: usize,
    /// IoU of the pair; always `>=` the matching threshold.
    pub iou: f64,
}

/// Partition of detections and ground truth produced by matching.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    /// Matched pairs, in detection processing order (score descending).
    pub true_positives: Vec<TruePositive>,
    /// Unmatched detection indices, in processing order.
    pub false_positives: Vec<usize>,
    /// Unclaimed ground-truth indices, ascending.
    pub false_negatives: Vec<usize>,
}

impl MatchResult {
    pub fn tp_count(&self) -> usize {
        self.true_positives.len()
    }

    pub fn fp_count(&self) -> usize {
        self.false_positives.len()
    }

    pub fn fn_count(&self) -> usize {
        self.false_negatives.len()
    }
}

/// Match detections against ground truth on one image.
///
/// `iou_threshold` must lie strictly between 0 and 1. All detections and all
/// ground-truth boxes must carry the same image id; mixing images is an error
/// rather than a silent mismatch. Indices in the result refer to positions in
/// the input slices.
pub fn match_detections(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    iou_threshold: f64,
) -> Result<MatchResult> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::InvalidThreshold {
            name: "iou_threshold",
            value: iou_threshold,
        });
    }
    let mut expected: Option<&str> = None;
    for id in detections
        .iter()
        .map(|d| d.image_id.as_str())
        .chain(ground_truths.iter().map(|g| g.image_id.as_str()))
    {
        match expected {
            None => expected = Some(id),
            Some(e) if e != id => {
                return Err(Error::MixedImageIds {
                    expected: e.to_string(),
                    found: id.to_string(),
                })
            }
            Some(_) => {}
        }
    }
    let dets: Vec<&Detection> = detections.iter().collect();
    let gts: Vec<&GroundTruth> = ground_truths.iter().collect();
    Ok(greedy_match_refs(&dets, &gts, iou_threshold))
}

/// Core greedy matcher over borrowed boxes. Callers have already validated
/// the threshold and image-id consistency; indices in the result refer to
/// positions in the given slices.
pub(crate) fn greedy_match_refs(
    dets: &[&Detection],
    gts: &[&GroundTruth],
    iou_threshold: f64,
) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut claimed = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for di in order {
        let det = dets[di];
        // Highest IoU wins; on exact ties the lower ground-truth index is
        // kept because only a strictly better IoU replaces the candidate.
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if claimed[gi] || gt.category != det.category {
                continue;
            }
            let iou = det.bbox.iou(&gt.bbox);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, iou)) => {
                claimed[gi] = true;
                result.true_positives.push(TruePositive {
                    detection: di,
                    ground_truth: gi,
                    iou,
                });
            }
            None => result.false_positives.push(di),
        }
    }
    result.false_negatives = (0..gts.len()).filter(|&gi| !claimed[gi]).collect();
    result
}
