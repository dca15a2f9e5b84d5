//! Dataset-level evaluation: precision/recall curves, average precision,
//! average recall, and localisation-recall-precision (LRP) scores.
//!
//! All metrics share the same greedy per-image matching (see
//! [`crate::matching`]); the curve and the LRP sweep differ only in how they
//! aggregate matched flags across the dataset. Conventions, in one place:
//!
//! * The PR curve walks detections in descending score order across the
//!   whole dataset (ties by input position) and records one point per rank:
//!   `recall_k = tp_k / |GT|`, `precision_k = tp_k / k`.
//! * AP integrates the curve with all-point interpolation: precision is
//!   replaced by its running maximum from the right, and the area is summed
//!   from recall 0.
//! * AR averages recall over the ten IoU thresholds `0.50, 0.55, ..., 0.95`.
//! * `LRP_t` at IoU tolerance `tau` combines localisation error, false
//!   positives and false negatives; `oLRP` is its minimum over all score
//!   thresholds that produce distinct detection subsets, plus the empty set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{greedy_match_refs, Detection, GroundTruth};

/// One point of a precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall curve over a whole dataset, one point per detection
/// rank. `scores[k]` is the confidence of the detection at rank `k`, so the
/// curve can be cut at any score threshold after the fact.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub scores: Vec<f64>,
}

/// LRP error at one score threshold.
///
/// `total` is the headline value in `[0, 1]` (lower is better); the three
/// components isolate localisation quality, false-positive rate and
/// false-negative rate. The counts are retained so tables can be rebuilt
/// from a report alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrpReport {
    pub total: f64,
    pub loc_component: f64,
    pub fp_component: f64,
    pub fn_component: f64,
    /// Score threshold this report was computed at. `1.0` with zero
    /// detections kept denotes the empty-set candidate of the oLRP sweep.
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
}

/// Aggregate evaluation of one detection set against one annotation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Average precision at IoU 0.5 (or at the threshold passed to
    /// [`evaluate`]).
    pub ap50: f64,
    /// Mean recall over IoU thresholds 0.50..0.95.
    pub ar: f64,
    /// Optimal LRP: the best achievable LRP over all score thresholds.
    pub olrp: LrpReport,
    pub pr_curve: PrCurve,
    /// Number of detections evaluated, before any score thresholding.
    pub predicted_boxes: usize,
}

// ---------------------------------------------------------------------------
// shared matching plumbing

fn gt_groups(gts: &[GroundTruth]) -> BTreeMap<&str, Vec<&GroundTruth>> {
    let mut map: BTreeMap<&str, Vec<&GroundTruth>> = BTreeMap::new();
    for gt in gts {
        map.entry(gt.image_id.as_str()).or_default().push(gt);
    }
    map
}

/// Match every detection in `dets` against its image's ground truth and
/// return, per detection, `Some(iou)` when it is a true positive.
fn match_outcomes(
    dets: &[&Detection],
    gts: &BTreeMap<&str, Vec<&GroundTruth>>,
    iou_threshold: f64,
) -> Vec<Option<f64>> {
    let mut by_image: BTreeMap<&str, (Vec<usize>, Vec<&Detection>)> = BTreeMap::new();
    for (i, det) in dets.iter().enumerate() {
        let slot = by_image.entry(det.image_id.as_str()).or_default();
        slot.0.push(i);
        slot.1.push(det);
    }
    let empty: Vec<&GroundTruth> = Vec::new();
    let mut outcomes = vec![None; dets.len()];
    for (image_id, (indices, image_dets)) in &by_image {
        let image_gts = gts.get(image_id).unwrap_or(&empty);
        let matched = greedy_match_refs(image_dets, image_gts, iou_threshold);
        for tp in matched.true_positives {
            outcomes[indices[tp.detection]] = Some(tp.iou);
        }
    }
    outcomes
}

/// Detection indices in evaluation order: score descending, ties by input
/// position.
fn rank_order(dets: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

fn check_threshold(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold { name, value })
    }
}

// ---------------------------------------------------------------------------
// PR curve and AP / AR

/// Compute the dataset-wide precision/recall curve at one IoU threshold.
///
/// Requires non-empty ground truth (recall is otherwise undefined). An empty
/// detection list yields an empty curve.
pub fn pr_curve(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    iou_threshold: f64,
) -> Result<PrCurve> {
    check_threshold("iou_threshold", iou_threshold)?;
    if ground_truths.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let dets: Vec<&Detection> = detections.iter().collect();
    let gts = gt_groups(ground_truths);
    let outcomes = match_outcomes(&dets, &gts, iou_threshold);

    let total_gt = ground_truths.len() as f64;
    let mut curve = PrCurve::default();
    let mut cum_tp = 0usize;
    for (rank, &i) in rank_order(&dets).iter().enumerate() {
        if outcomes[i].is_some() {
            cum_tp += 1;
        }
        curve.points.push(PrPoint {
            recall: cum_tp as f64 / total_gt,
            precision: cum_tp as f64 / (rank + 1) as f64,
        });
        curve.scores.push(dets[i].score);
    }
    Ok(curve)
}

/// Area under a PR curve using all-point interpolation.
///
/// The raw precision column is replaced by its running maximum from the
/// right (the monotone envelope), then the area is accumulated over recall
/// increments starting from recall 0. An empty curve has AP 0.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    if pts.is_empty() {
        return 0.0;
    }
    let mut envelope = vec![0.0; pts.len()];
    let mut running = 0.0f64;
    for (i, p) in pts.iter().enumerate().rev() {
        running = running.max(p.precision);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, p) in pts.iter().enumerate() {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * envelope[i];
            prev_recall = p.recall;
        }
    }
    ap
}

/// The ten-point IoU grid used by [`average_recall`].
const AR_THRESHOLDS: [u32; 10] = [50, 55, 60, 65, 70, 75, 80, 85, 90, 95];

/// Mean recall over the IoU grid 0.50, 0.55, ..., 0.95.
///
/// Recall at each threshold counts greedy matches over the whole dataset
/// (no score cut), so a detector is rewarded for localising every annotated
/// box at least once.
pub fn average_recall(detections: &[Detection], ground_truths: &[GroundTruth]) -> Result<f64> {
    if ground_truths.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let dets: Vec<&Detection> = detections.iter().collect();
    let gts = gt_groups(ground_truths);
    let total_gt = ground_truths.len() as f64;
    let mut sum = 0.0;
    for t in AR_THRESHOLDS {
        let outcomes = match_outcomes(&dets, &gts, f64::from(t) / 100.0);
        let tp = outcomes.iter().filter(|o| o.is_some()).count();
        sum += tp as f64 / total_gt;
    }
    Ok(sum / AR_THRESHOLDS.len() as f64)
}

// ---------------------------------------------------------------------------
// LRP

/// The LRP total over real-valued masses; shared by the counted path and
/// the component-recombination path.
fn lrp_total(loc_error_sum: f64, tp: f64, fp: f64, fn_count: f64, tau: f64) -> f64 {
    (loc_error_sum / (1.0 - tau) + fp + fn_count) / (tp + fp + fn_count)
}

fn lrp_from_counts(
    loc_error_sum: f64,
    tp: usize,
    fp: usize,
    fn_count: usize,
    tau: f64,
    threshold: f64,
) -> Result<LrpReport> {
    let samples = tp + fp + fn_count;
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    let total = lrp_total(loc_error_sum, tp as f64, fp as f64, fn_count as f64, tau);
    let loc_component = if tp > 0 {
        loc_error_sum / tp as f64
    } else {
        0.0
    };
    let fp_component = if tp + fp > 0 {
        fp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let fn_component = if tp + fn_count > 0 {
        fn_count as f64 / (tp + fn_count) as f64
    } else {
        0.0
    };
    Ok(LrpReport {
        total,
        loc_component,
        fp_component,
        fn_component,
        threshold,
        tp,
        fp,
        fn_count,
    })
}

/// Recombine the three LRP components into the total they imply.
///
/// Useful for cross-checking published result tables: given the
/// localization component (mean `1 − IoU` over TPs), the FP component
/// (`1 − precision`) and the FN component (`1 − recall`) at tolerance
/// `tau`, this evaluates the same total formula [`lrp_at`] uses, with the
/// counts scaled to a unit of true-positive mass.
pub fn lrp_from_components(
    loc_component: f64,
    fp_component: f64,
    fn_component: f64,
    tau: f64,
) -> Result<f64> {
    check_threshold("tau", tau)?;
    for (name, value) in [
        ("loc_component", loc_component),
        ("fp_component", fp_component),
        ("fn_component", fn_component),
    ] {
        if !(value.is_finite() && (0.0..1.0).contains(&value)) {
            return Err(Error::InvalidConfig {
                detail: format!("{name} {value} must lie in [0, 1)"),
            });
        }
    }
    // Per unit of TP mass: FP = fpc/(1−fpc) and FN = fnc/(1−fnc) recover
    // the count ratios behind the two rate components.
    let fp = fp_component / (1.0 - fp_component);
    let fn_count = fn_component / (1.0 - fn_component);
    Ok(lrp_total(loc_component, 1.0, fp, fn_count, tau))
}

/// LRP error at IoU tolerance `tau`, keeping only detections with score
/// `>= score_threshold`.
///
/// Errors when `tau` leaves `(0, 1)` or when there is nothing to score at
/// all (no ground truth and no detections kept).
pub fn lrp_at(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    tau: f64,
    score_threshold: f64,
) -> Result<LrpReport> {
    check_threshold("tau", tau)?;
    let kept: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.score >= score_threshold)
        .collect();
    let gts = gt_groups(ground_truths);
    let outcomes = match_outcomes(&kept, &gts, tau);
    let tp = outcomes.iter().filter(|o| o.is_some()).count();
    let loc_error_sum: f64 = outcomes.iter().flatten().map(|iou| 1.0 - iou).sum();
    lrp_from_counts(
        loc_error_sum,
        tp,
        kept.len() - tp,
        ground_truths.len() - tp,
        tau,
        score_threshold,
    )
}

/// Optimal LRP: the minimum of [`lrp_at`] over every score threshold that
/// yields a distinct detection subset, plus the empty set (reported with
/// threshold 1.0). Ties go to the higher threshold.
pub fn olrp(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    tau: f64,
) -> Result<LrpReport> {
    check_threshold("tau", tau)?;
    if ground_truths.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    // The empty candidate: every annotated box is a miss, nothing else.
    let mut best = lrp_from_counts(0.0, 0, 0, ground_truths.len(), tau, 1.0)?;
    let mut scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();
    for s in scores {
        let report = lrp_at(detections, ground_truths, tau, s)?;
        if report.total < best.total {
            best = report;
        }
    }
    Ok(best)
}

/// Number of detections at or above a score threshold.
pub fn count_boxes(detections: &[Detection], score_threshold: f64) -> usize {
    detections
        .iter()
        .filter(|d| d.score >= score_threshold)
        .count()
}

/// Full evaluation of one detection set: PR curve, AP, AR and oLRP.
pub fn evaluate(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    iou_threshold: f64,
    tau: f64,
) -> Result<MetricReport> {
    let curve = pr_curve(detections, ground_truths, iou_threshold)?;
    let ap50 = average_precision(&curve);
    let ar = average_recall(detections, ground_truths)?;
    let olrp = olrp(detections, ground_truths, tau)?;
    Ok(MetricReport {
        ap50,
        ar,
        olrp,
        pr_curve: curve,
        predicted_boxes: detections.len(),
    })
}
