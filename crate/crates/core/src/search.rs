//! Exhaustive ensemble search over model subsets and weight tuples.
//!
//! Given a pool of n models, every subset of size 2..=n is crossed with
//! every weight tuple in `{1..=n}^k` (k = subset size; the upper bound is
//! configurable). Each assignment is fused over the dataset and scored under
//! one criterion; the best assignment, a leaderboard, and the number of
//! evaluated assignments are returned.
//!
//! The search is a pure function of its inputs: enumeration order is fixed
//! (subsets in lexicographic member order, tuples in lexicographic numeric
//! order), ties are broken by a total order (criterion, then AP50, then
//! fewer members, then lexicographically smallest members and weights), and
//! parallel evaluation preserves assignment order before the reduction, so
//! sequential and multi-threaded runs return identical results.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DetectionSet;
use crate::matching::{Detection, GroundTruth};
use crate::metrics::{average_precision, average_recall, evaluate, olrp, pr_curve, MetricReport};
use crate::wbf::{fuse_dataset, FusionConfig, ModelRun, RunView};

/// One candidate ensemble: which models participate and at what weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightAssignment {
    /// Participating model ids, in pool order.
    pub members: Vec<String>,
    /// Integer weights aligned with `members`.
    pub weights: Vec<u32>,
}

impl fmt::Display for WeightAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (m, w)) in self.members.iter().zip(&self.weights).enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{m}:{w}")?;
        }
        Ok(())
    }
}

/// What the search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchCriterion {
    MaximizeAp50,
    MaximizeAr,
    MinimizeOlrp,
}

impl SearchCriterion {
    /// True when larger criterion values are better.
    fn maximizing(self) -> bool {
        !matches!(self, SearchCriterion::MinimizeOlrp)
    }
}

impl std::str::FromStr for SearchCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap50" => Ok(SearchCriterion::MaximizeAp50),
            "ar" => Ok(SearchCriterion::MaximizeAr),
            "olrp" => Ok(SearchCriterion::MinimizeOlrp),
            other => Err(Error::InvalidConfig {
                detail: format!("unknown criterion {other:?}; expected ap50, ar or olrp"),
            }),
        }
    }
}

impl fmt::Display for SearchCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SearchCriterion::MaximizeAp50 => "ap50",
            SearchCriterion::MaximizeAr => "ar",
            SearchCriterion::MinimizeOlrp => "olrp",
        };
        f.write_str(s)
    }
}

/// Everything the search needs besides the pool, ground truth and criterion.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub fusion: FusionConfig,
    /// IoU threshold for metric matching (AP and the PR curve).
    pub match_iou: f64,
    /// IoU tolerance for the LRP family.
    pub tau: f64,
    /// Skip weight tuples that are integer multiples of an earlier tuple
    /// for the same subset (fusion output is scale-insensitive on full
    /// clusters, so such tuples are usually redundant).
    pub dedupe_scaling: bool,
    /// Weight upper bound; defaults to the pool size.
    pub max_weight: Option<u32>,
    /// Leaderboard depth.
    pub leaderboard_size: usize,
    /// Worker threads for assignment evaluation; 0 uses all cores, 1 is
    /// fully sequential. The result is identical either way.
    pub workers: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            fusion: FusionConfig::default(),
            match_iou: 0.5,
            tau: 0.5,
            dedupe_scaling: false,
            max_weight: None,
            leaderboard_size: 20,
            workers: 0,
        }
    }
}

/// One leaderboard row: an assignment and its criterion value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub assignment: WeightAssignment,
    pub value: f64,
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub criterion: SearchCriterion,
    pub best: WeightAssignment,
    /// Full evaluation of the best assignment.
    pub best_report: MetricReport,
    /// Number of assignments evaluated (after any dedupe).
    pub evaluated_count: usize,
    /// Top assignments under the same total order as `best`.
    pub leaderboard: Vec<LeaderboardEntry>,
}

// ---------------------------------------------------------------------------
// enumeration

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn subsets_lex(n: usize) -> Vec<Vec<usize>> {
    // Depth-first with ascending extension = lexicographic order over
    // variable-length index sequences: [0,1], [0,1,2], ..., [1,2], ...
    fn walk(start: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            prefix.push(i);
            if prefix.len() >= 2 {
                out.push(prefix.clone());
            }
            walk(i + 1, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(0, n, &mut Vec::new(), &mut out);
    out
}

/// Advance a weight tuple in lexicographic order over `{1..=max}^k`.
/// Returns false once the last tuple has been visited.
fn next_tuple(weights: &mut [u32], max: u32) -> bool {
    for w in weights.iter_mut().rev() {
        if *w < max {
            *w += 1;
            return true;
        }
        *w = 1;
    }
    false
}

/// Enumerate every assignment for a pool of model ids.
///
/// Subsets of size 2..=n are visited in lexicographic member order; weight
/// tuples in lexicographic numeric order over `{1..=max_weight}^k`, where
/// `max_weight` defaults to the pool size. With `dedupe_scaling`, tuples
/// that are integer multiples of an already-yielded tuple for the same
/// subset (equivalently: tuples with gcd > 1) are skipped.
pub fn enumerate(
    pool: &[String],
    dedupe_scaling: bool,
    max_weight: Option<u32>,
) -> Result<Vec<WeightAssignment>> {
    if pool.len() < 2 {
        return Err(Error::PoolTooSmall { size: pool.len() });
    }
    let unique: BTreeSet<&String> = pool.iter().collect();
    if unique.len() != pool.len() {
        let dup = pool
            .iter()
            .find(|id| pool.iter().filter(|o| o == id).count() > 1)
            .expect("a duplicate exists");
        return Err(Error::DuplicateModel {
            model_id: dup.clone(),
        });
    }
    let max = max_weight.unwrap_or(pool.len() as u32);
    if max == 0 {
        return Err(Error::InvalidConfig {
            detail: "max_weight must be at least 1".into(),
        });
    }

    let mut out = Vec::new();
    for subset in subsets_lex(pool.len()) {
        let members: Vec<String> = subset.iter().map(|&i| pool[i].clone()).collect();
        let mut weights = vec![1u32; subset.len()];
        loop {
            let keep = !dedupe_scaling || weights.iter().copied().fold(0, gcd) == 1;
            if keep {
                out.push(WeightAssignment {
                    members: members.clone(),
                    weights: weights.clone(),
                });
            }
            if !next_tuple(&mut weights, max) {
                break;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// search

struct Summary {
    assignment: WeightAssignment,
    value: f64,
    ap50: f64,
}

/// Total order over summaries: better first. Criterion value (direction per
/// criterion), then AP50 descending, then fewer members, then
/// lexicographically smallest (members, weights).
fn compare(a: &Summary, b: &Summary, criterion: SearchCriterion) -> std::cmp::Ordering {
    let primary = if criterion.maximizing() {
        b.value.total_cmp(&a.value)
    } else {
        a.value.total_cmp(&b.value)
    };
    primary
        .then(b.ap50.total_cmp(&a.ap50))
        .then(a.assignment.members.len().cmp(&b.assignment.members.len()))
        .then_with(|| a.assignment.members.cmp(&b.assignment.members))
        .then_with(|| a.assignment.weights.cmp(&b.assignment.weights))
}

fn evaluate_assignment(
    assignment: &WeightAssignment,
    pool: &[DetectionSet],
    ground_truths: &[GroundTruth],
    criterion: SearchCriterion,
    options: &SearchOptions,
) -> Result<Summary> {
    let runs: Vec<RunView> = assignment
        .members
        .iter()
        .zip(&assignment.weights)
        .map(|(id, &w)| {
            let set = pool
                .iter()
                .find(|s| &s.model_id == id)
                .expect("assignments are enumerated from the pool");
            RunView {
                model_id: &set.model_id,
                weight: f64::from(w),
                detections: &set.detections,
            }
        })
        .collect();
    let fused = fuse_dataset(&runs, &options.fusion, "ensemble")?;
    let curve = pr_curve(&fused, ground_truths, options.match_iou)?;
    let ap50 = average_precision(&curve);
    let value = match criterion {
        SearchCriterion::MaximizeAp50 => ap50,
        SearchCriterion::MaximizeAr => average_recall(&fused, ground_truths)?,
        SearchCriterion::MinimizeOlrp => olrp(&fused, ground_truths, options.tau)?.total,
    };
    Ok(Summary {
        assignment: assignment.clone(),
        value,
        ap50,
    })
}

/// Exhaustively search subsets × weights of `pool` for the assignment that
/// optimizes `criterion` on `ground_truths`.
///
/// Deterministic regardless of `options.workers`; see the module docs for
/// the tie-break order.
pub fn search(
    pool: &[DetectionSet],
    ground_truths: &[GroundTruth],
    criterion: SearchCriterion,
    options: &SearchOptions,
) -> Result<SearchResult> {
    if ground_truths.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let ids: Vec<String> = pool.iter().map(|s| s.model_id.clone()).collect();
    let assignments = enumerate(&ids, options.dedupe_scaling, options.max_weight)?;

    let evaluate_one =
        |a: &WeightAssignment| evaluate_assignment(a, pool, ground_truths, criterion, options);
    // Order-preserving collection keeps the reduction below independent of
    // thread scheduling.
    let summaries: Vec<Summary> = if options.workers == 1 {
        assignments
            .iter()
            .map(evaluate_one)
            .collect::<Result<_>>()?
    } else {
        let build = rayon::ThreadPoolBuilder::new().num_threads(options.workers);
        let pool_threads = build.build().map_err(|e| Error::InvalidConfig {
            detail: format!("worker pool: {e}"),
        })?;
        pool_threads.install(|| {
            assignments
                .par_iter()
                .map(evaluate_one)
                .collect::<Result<_>>()
        })?
    };

    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| compare(&summaries[a], &summaries[b], criterion));
    let best_summary = &summaries[order[0]];
    let best = best_summary.assignment.clone();

    // Re-evaluate the winner for its full report.
    let runs: Vec<ModelRun> = best
        .members
        .iter()
        .zip(&best.weights)
        .map(|(id, &w)| ModelRun {
            model_id: id.clone(),
            weight: f64::from(w),
            detections: pool
                .iter()
                .find(|s| &s.model_id == id)
                .expect("winner comes from the pool")
                .detections
                .clone(),
        })
        .collect();
    let views: Vec<RunView> = runs.iter().map(ModelRun::view).collect();
    let fused = fuse_dataset(&views, &options.fusion, "ensemble")?;
    let best_report = evaluate(&fused, ground_truths, options.match_iou, options.tau)?;

    let leaderboard = order
        .iter()
        .take(options.leaderboard_size)
        .map(|&i| LeaderboardEntry {
            assignment: summaries[i].assignment.clone(),
            value: summaries[i].value,
        })
        .collect();

    Ok(SearchResult {
        criterion,
        best,
        best_report,
        evaluated_count: summaries.len(),
        leaderboard,
    })
}

/// Second-level combination: fuse already-fused detection lists (each with a
/// given weight) and evaluate the result.
pub fn combo(
    first_level: &[ModelRun],
    ground_truths: &[GroundTruth],
    config: &FusionConfig,
    match_iou: f64,
    tau: f64,
    ensemble_id: &str,
) -> Result<(Vec<Detection>, MetricReport)> {
    if first_level.len() < 2 {
        return Err(Error::PoolTooSmall {
            size: first_level.len(),
        });
    }
    let views: Vec<RunView> = first_level.iter().map(ModelRun::view).collect();
    let fused = fuse_dataset(&views, config, ensemble_id)?;
    let report = evaluate(&fused, ground_truths, match_iou, tau)?;
    Ok((fused, report))
}
