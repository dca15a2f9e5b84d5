//! Weighted boxes fusion: merge detection lists from several models into one
//! averaged list per image.
//!
//! Unlike non-maximum suppression, fusion does not discard overlapping boxes;
//! it averages them. Every surviving detection carries a weighted score
//! `c = score × model_weight`. Detections are visited in descending `c`
//! order and greedily attached to the first cluster (in creation order)
//! whose current fused box overlaps them with IoU strictly above the
//! threshold; otherwise they open a new cluster. A cluster's fused box is
//! the `c`-weighted average of its members' corners, and its confidence is
//!
//! ```text
//! score = (Σ c_i / |members|) × min(|members|, W) / W,   W = Σ run weights
//! ```
//!
//! clamped to `[0, 1]`, so boxes confirmed by few models are penalised.
//! Clustering never crosses categories.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{iou_corners, BBox};
use crate::matching::Detection;

/// Fusion parameters; defaults follow common practice for X-ray ensembles
/// (cluster IoU 0.5, skip threshold 0.3, box limit 6000).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Cluster-joining threshold: a detection joins a cluster only when IoU
    /// is strictly greater than this.
    pub iou_threshold: f64,
    /// Detections scoring below this are dropped before fusion.
    pub skip_box_threshold: f64,
    /// Maximum fused boxes kept per image, by descending score.
    pub box_limit: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            iou_threshold: 0.5,
            skip_box_threshold: 0.3,
            box_limit: 6000,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::InvalidThreshold {
                name: "iou_threshold",
                value: self.iou_threshold,
            });
        }
        if !(self.skip_box_threshold >= 0.0 && self.skip_box_threshold < 1.0) {
            return Err(Error::InvalidThreshold {
                name: "skip_box_threshold",
                value: self.skip_box_threshold,
            });
        }
        if self.box_limit == 0 {
            return Err(Error::InvalidConfig {
                detail: "box_limit must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One model's detections plus its ensemble weight.
///
/// Search assigns integer weights; the fusion arithmetic itself accepts any
/// strictly positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model_id: String,
    pub weight: f64,
    pub detections: Vec<Detection>,
}

impl ModelRun {
    pub fn view(&self) -> RunView<'_> {
        RunView {
            model_id: &self.model_id,
            weight: self.weight,
            detections: &self.detections,
        }
    }
}

/// Borrowed form of [`ModelRun`], so callers (notably the weight search) can
/// re-weight a fixed pool of detections without cloning it.
#[derive(Debug, Clone, Copy)]
pub struct RunView<'a> {
    pub model_id: &'a str,
    pub weight: f64,
    pub detections: &'a [Detection],
}

/// Borrow every run in a slice.
pub fn run_views(runs: &[ModelRun]) -> Vec<RunView<'_>> {
    runs.iter().map(ModelRun::view).collect()
}

/// Membership record inside a [`FusedCluster`]: which detection of which run
/// joined, and at what model weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMember {
    /// Index into the run slice passed to fusion.
    pub run: usize,
    /// Index into that run's detection list.
    pub detection: usize,
    pub weight: f64,
}

/// One fused cluster with its provenance, exposed for inspection and
/// testing; [`fuse_image`] flattens these into plain detections.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCluster {
    /// Members in joining order (the first member opened the cluster).
    pub members: Vec<ClusterMember>,
    pub fused_box: BBox,
    /// Pre-rescale score `Σ c_i / |members|`.
    pub raw_score: f64,
    /// Final confidence after the `min(|members|, W) / W` rescale and clamp.
    pub score: f64,
    pub category: i64,
}

// ---------------------------------------------------------------------------
// internals

struct Candidate {
    run: usize,
    det: usize,
    c: f64,
    corners: [f64; 4],
    category: i64,
}

struct ClusterAcc {
    category: i64,
    members: Vec<ClusterMember>,
    sum_c: f64,
    // c-weighted corner sums and the current fused corners derived from them.
    sums: [f64; 4],
    corners: [f64; 4],
}

impl ClusterAcc {
    fn open(cand: &Candidate, weight: f64) -> Self {
        let mut acc = ClusterAcc {
            category: cand.category,
            members: Vec::new(),
            sum_c: 0.0,
            sums: [0.0; 4],
            corners: cand.corners,
        };
        acc.join(cand, weight);
        acc
    }

    fn join(&mut self, cand: &Candidate, weight: f64) {
        self.members.push(ClusterMember {
            run: cand.run,
            detection: cand.det,
            weight,
        });
        self.sum_c += cand.c;
        for (sum, corner) in self.sums.iter_mut().zip(cand.corners) {
            *sum += cand.c * corner;
        }
        // A singleton cluster keeps its founding box bit-for-bit (so fusion
        // of non-overlapping boxes is an exact identity); averaging starts
        // with the second member.
        if self.members.len() > 1 {
            for (corner, sum) in self.corners.iter_mut().zip(self.sums) {
                *corner = sum / self.sum_c;
            }
        }
    }

    fn raw_score(&self) -> f64 {
        self.sum_c / self.members.len() as f64
    }

    fn final_score(&self, total_weight: f64) -> f64 {
        let members = self.members.len() as f64;
        (self.raw_score() * members.min(total_weight) / total_weight).clamp(0.0, 1.0)
    }
}

/// Validate shared preconditions and return the total ensemble weight `W`.
fn validate_runs(runs: &[RunView], config: &FusionConfig) -> Result<f64> {
    config.validate()?;
    if runs.is_empty() {
        return Err(Error::EmptyRuns);
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for run in runs {
        if !(run.weight.is_finite() && run.weight > 0.0) {
            return Err(Error::InvalidWeight {
                model_id: run.model_id.to_string(),
                weight: run.weight,
            });
        }
        if !seen.insert(run.model_id) {
            return Err(Error::DuplicateModel {
                model_id: run.model_id.to_string(),
            });
        }
        for (i, det) in run.detections.iter().enumerate() {
            if !(det.score.is_finite() && (0.0..=1.0).contains(&det.score)) {
                return Err(Error::InvalidScore {
                    value: det.score,
                    context: format!("model {:?}, detection {i}", run.model_id),
                });
            }
        }
        total += run.weight;
    }
    Ok(total)
}

/// Cluster one image's candidates. Consumes candidates of mixed categories;
/// clustering is category-aware by construction.
fn cluster_image(
    mut candidates: Vec<Candidate>,
    runs: &[RunView],
    total_weight: f64,
    config: &FusionConfig,
) -> Result<Vec<FusedCluster>> {
    candidates.sort_by(|a, b| {
        b.c.total_cmp(&a.c)
            .then(a.run.cmp(&b.run))
            .then(a.det.cmp(&b.det))
    });
    let mut clusters: Vec<ClusterAcc> = Vec::new();
    for cand in &candidates {
        let joined = clusters.iter_mut().find(|cl| {
            cl.category == cand.category
                && iou_corners(cl.corners, cand.corners) > config.iou_threshold
        });
        match joined {
            Some(cl) => cl.join(cand, runs[cand.run].weight),
            None => clusters.push(ClusterAcc::open(cand, runs[cand.run].weight)),
        }
    }

    let mut order: Vec<usize> = (0..clusters.len()).collect();
    order.sort_by(|&a, &b| {
        clusters[b]
            .final_score(total_weight)
            .total_cmp(&clusters[a].final_score(total_weight))
            .then(a.cmp(&b))
    });
    order.truncate(config.box_limit);

    order
        .into_iter()
        .map(|i| {
            let cl = &clusters[i];
            let [x1, y1, x2, y2] = cl.corners;
            Ok(FusedCluster {
                members: cl.members.clone(),
                fused_box: BBox::new(x1, y1, x2, y2)?,
                raw_score: cl.raw_score(),
                score: cl.final_score(total_weight),
                category: cl.category,
            })
        })
        .collect()
}

fn candidates_of(run_idx: usize, run: &RunView, config: &FusionConfig) -> Vec<Candidate> {
    run.detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.score >= config.skip_box_threshold)
        .map(|(det, d)| Candidate {
            run: run_idx,
            det,
            c: d.score * run.weight,
            corners: [d.bbox.x1(), d.bbox.y1(), d.bbox.x2(), d.bbox.y2()],
            category: d.category,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// public entry points

/// Fuse one image's runs and return the full clusters, including member
/// provenance. All detections must share one image id.
pub fn fuse_image_clusters(runs: &[RunView], config: &FusionConfig) -> Result<Vec<FusedCluster>> {
    let total_weight = validate_runs(runs, config)?;
    let mut expected: Option<&str> = None;
    for run in runs {
        for det in run.detections {
            match expected {
                None => expected = Some(&det.image_id),
                Some(e) if e != det.image_id => {
                    return Err(Error::MixedImageIds {
                        expected: e.to_string(),
                        found: det.image_id.clone(),
                    })
                }
                Some(_) => {}
            }
        }
    }
    let candidates: Vec<Candidate> = runs
        .iter()
        .enumerate()
        .flat_map(|(i, run)| candidates_of(i, run, config))
        .collect();
    cluster_image(candidates, runs, total_weight, config)
}

/// Fuse one image's runs into plain detections (model id left unset).
pub fn fuse_image(runs: &[RunView], config: &FusionConfig) -> Result<Vec<Detection>> {
    let image_id = runs
        .iter()
        .flat_map(|r| r.detections)
        .map(|d| d.image_id.clone())
        .next();
    let clusters = fuse_image_clusters(runs, config)?;
    let Some(image_id) = image_id else {
        return Ok(Vec::new());
    };
    Ok(clusters
        .into_iter()
        .map(|cl| Detection {
            image_id: image_id.clone(),
            bbox: cl.fused_box,
            score: cl.score,
            category: cl.category,
            model_id: None,
        })
        .collect())
}

/// Fuse runs spanning many images: each image is fused independently and the
/// outputs are concatenated in ascending image-id order (scores descending
/// within an image). Fused detections carry `model_id = ensemble_id`.
pub fn fuse_dataset(
    runs: &[RunView],
    config: &FusionConfig,
    ensemble_id: &str,
) -> Result<Vec<Detection>> {
    let total_weight = validate_runs(runs, config)?;
    let mut per_image: BTreeMap<&str, Vec<Candidate>> = BTreeMap::new();
    for (run_idx, run) in runs.iter().enumerate() {
        for cand in candidates_of(run_idx, run, config) {
            let image_id = &run.detections[cand.det].image_id;
            per_image.entry(image_id).or_default().push(cand);
        }
    }
    let mut fused = Vec::new();
    for (image_id, candidates) in per_image {
        for cl in cluster_image(candidates, runs, total_weight, config)? {
            fused.push(Detection {
                image_id: image_id.to_string(),
                bbox: cl.fused_box,
                score: cl.score,
                category: cl.category,
                model_id: Some(ensemble_id.to_string()),
            });
        }
    }
    Ok(fused)
}
