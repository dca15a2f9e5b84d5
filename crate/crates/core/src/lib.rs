//! Detection fusion and evaluation for multi-model object detectors.
//!
//! The pipeline this library supports, end to end:
//!
//! 1. [`io`] loads COCO-convention annotations and per-model detection
//!    files, normalizing every box against its image size.
//! 2. [`wbf`] fuses detections from several models into one list by
//!    weighted boxes fusion.
//! 3. [`matching`] + [`metrics`] score a detection list against ground
//!    truth: AP50, AR, PR curves and the LRP/oLRP family.
//! 4. [`search`] exhaustively tries model subsets and integer weight tuples
//!    to find the ensemble that optimizes one of those metrics.
//! 5. [`preprocess`] prepares grayscale X-ray images for training and
//!    inference: background-aware inversion, CLAHE, rescaling, and seeded
//!    augmentation.
//!
//! Everything is deterministic: fixed orderings, explicit tie-breaks, and
//! seeded randomness, so identical inputs produce identical outputs — byte
//! for byte where files are written.

pub mod error;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod preprocess;
pub mod search;
pub mod wbf;

pub use error::{Error, Result};
pub use geometry::{to_normalized, to_pixel, BBox, ImageSize, PixelBox};
pub use io::{
    csv_to_json, json_to_csv, load_annotations, load_detections, pr_curve_csv, pr_curve_svg,
    render_metric_table, render_search_table, save_annotations, save_detections,
    write_metric_report, write_search_report, AnnotationSet, Category, DetectionSet, ImageInfo,
    ReportFormat, CSV_HEADER,
};
pub use matching::{match_detections, Detection, GroundTruth, MatchResult, TruePositive};
pub use metrics::{
    average_precision, average_recall, count_boxes, evaluate, lrp_at, lrp_from_components, olrp,
    pr_curve, LrpReport, MetricReport, PrCurve, PrPoint,
};
pub use preprocess::{
    augment, clahe, dominant_background, flip_horizontal, invert_if_light, load_gray_png, rescale,
    resize_bilinear, save_gray_png, save_rgb_png, AppliedOps, AugmentParams, Background,
    ClaheParams, GrayImage, RESCALE_SIZE,
};
pub use search::{
    combo, enumerate, search, LeaderboardEntry, SearchCriterion, SearchOptions, SearchResult,
    WeightAssignment,
};
pub use wbf::{
    fuse_dataset, fuse_image, fuse_image_clusters, run_views, ClusterMember, FusedCluster,
    FusionConfig, ModelRun, RunView,
};
