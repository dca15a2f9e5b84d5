//! File formats: COCO-convention annotations, detection JSON, the flat CSV
//! detection format, and report/curve writers.
//!
//! Two JSON layouts are canonical. Annotations follow the COCO object
//! detection convention (`images` / `annotations` / `categories`, boxes as
//! `[x, y, w, h]` in pixels). Detections are a flat array of
//! `{image_id, category_id, bbox, score}` records. Boxes are normalized on
//! load against the image sizes in the annotation set, so everything past
//! this module is resolution-independent.
//!
//! Loaders validate and reject; they never repair. Every record-level error
//! carries the file path and record index. Writers produce byte-identical
//! output for identical inputs: fixed orderings and shortest round-trip
//! number formatting throughout.

mod convert;
mod report;

pub use convert::{csv_to_json, json_to_csv, CSV_HEADER};
pub use report::{
    pr_curve_csv, pr_curve_svg, render_metric_table, render_search_table, write_metric_report,
    write_search_report, ReportFormat,
};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{to_normalized, to_pixel, ImageSize, PixelBox};
use crate::matching::{Detection, GroundTruth};

/// One entry of the `images` array: identity plus pixel dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInfo {
    pub id: String,
    pub size: ImageSize,
    pub file_name: String,
}

/// One entry of the `categories` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub id: i64,
    pub name: String,
}

/// A loaded annotation file: image roster, ground-truth boxes (normalized),
/// and the category catalogue.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub images: Vec<ImageInfo>,
    pub ground_truths: Vec<GroundTruth>,
    pub categories: Vec<Category>,
}

impl AnnotationSet {
    /// Look up an image by id.
    pub fn image(&self, id: &str) -> Option<&ImageInfo> {
        self.images.iter().find(|img| img.id == id)
    }
}

/// One model's detections, loaded from a detection file and resolved against
/// an [`AnnotationSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub model_id: String,
    pub detections: Vec<Detection>,
}

// ---------------------------------------------------------------------------
// raw serde layer

/// Image ids appear as numbers or strings in the wild; internally they are
/// opaque strings. Numeric-looking ids are written back as numbers so a
/// load/save cycle reproduces the original file shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawId {
    Num(i64),
    Text(String),
}

impl RawId {
    fn into_string(self) -> String {
        match self {
            RawId::Num(n) => n.to_string(),
            RawId::Text(s) => s,
        }
    }

    fn from_string(s: &str) -> RawId {
        match s.parse::<i64>() {
            // Guard against ids like "007": only round-trippable numbers
            // are written back in numeric form.
            Ok(n) if n.to_string() == s => RawId::Num(n),
            _ => RawId::Text(s.to_string()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawAnnotationFile {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    id: RawId,
    width: u32,
    height: u32,
    file_name: String,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<i64>,
    image_id: RawId,
    category_id: i64,
    bbox: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct RawCategory {
    id: i64,
    name: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RawDetection {
    pub(crate) image_id: RawId,
    pub(crate) category_id: i64,
    pub(crate) bbox: [f64; 4],
    pub(crate) score: f64,
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, err: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        detail: err.to_string(),
    }
}

fn record_error(path: &Path, index: usize, detail: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        index,
        detail: detail.into(),
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize infallibly");
    bytes.push(b'\n');
    bytes
}

// ---------------------------------------------------------------------------
// annotations

/// Load a COCO-convention annotation file.
///
/// Boxes are converted from pixel `[x, y, w, h]` to normalized corner form.
/// Dangling image or category references, duplicate ids, and degenerate or
/// out-of-bounds boxes are rejected with the offending record index.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let raw: RawAnnotationFile =
        serde_json::from_str(&read_file(path)?).map_err(|e| parse_error(path, e))?;

    let mut images = Vec::with_capacity(raw.images.len());
    let mut sizes: BTreeMap<String, ImageSize> = BTreeMap::new();
    for (i, img) in raw.images.into_iter().enumerate() {
        let id = img.id.into_string();
        let size = ImageSize::new(img.width, img.height)
            .map_err(|e| record_error(path, i, format!("image {id:?}: {e}")))?;
        if sizes.insert(id.clone(), size).is_some() {
            return Err(record_error(path, i, format!("duplicate image id {id:?}")));
        }
        images.push(ImageInfo {
            id,
            size,
            file_name: img.file_name,
        });
    }

    let mut categories = Vec::with_capacity(raw.categories.len());
    let mut category_ids = std::collections::BTreeSet::new();
    for (i, cat) in raw.categories.into_iter().enumerate() {
        if !category_ids.insert(cat.id) {
            return Err(record_error(
                path,
                i,
                format!("duplicate category id {}", cat.id),
            ));
        }
        categories.push(Category {
            id: cat.id,
            name: cat.name,
        });
    }

    let mut ground_truths = Vec::with_capacity(raw.annotations.len());
    for (i, ann) in raw.annotations.into_iter().enumerate() {
        let image_id = ann.image_id.into_string();
        let size = *sizes
            .get(&image_id)
            .ok_or_else(|| record_error(path, i, format!("unknown image id {image_id:?}")))?;
        if !category_ids.contains(&ann.category_id) {
            return Err(record_error(
                path,
                i,
                format!("unknown category id {}", ann.category_id),
            ));
        }
        let [x, y, w, h] = ann.bbox;
        let bbox = to_normalized(PixelBox::from_xywh(x, y, w, h), size)
            .map_err(|e| record_error(path, i, e.to_string()))?;
        ground_truths.push(GroundTruth {
            image_id,
            bbox,
            category: ann.category_id,
        });
    }

    Ok(AnnotationSet {
        images,
        ground_truths,
        categories,
    })
}

/// Write an annotation set back to COCO-convention JSON. Annotation ids are
/// regenerated sequentially from 1.
pub fn save_annotations(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let sizes: BTreeMap<&str, ImageSize> = set
        .images
        .iter()
        .map(|img| (img.id.as_str(), img.size))
        .collect();
    let raw = RawAnnotationFile {
        images: set
            .images
            .iter()
            .map(|img| RawImage {
                id: RawId::from_string(&img.id),
                width: img.size.width(),
                height: img.size.height(),
                file_name: img.file_name.clone(),
            })
            .collect(),
        annotations: set
            .ground_truths
            .iter()
            .enumerate()
            .map(|(i, gt)| {
                let size = sizes.get(gt.image_id.as_str()).copied().ok_or_else(|| {
                    record_error(
                        path,
                        i,
                        format!("ground truth references unknown image {:?}", gt.image_id),
                    )
                })?;
                let px = to_pixel(&gt.bbox, size);
                Ok(RawAnnotation {
                    id: Some(i as i64 + 1),
                    image_id: RawId::from_string(&gt.image_id),
                    category_id: gt.category,
                    bbox: [px.x1, px.y1, px.x2 - px.x1, px.y2 - px.y1],
                })
            })
            .collect::<Result<_>>()?,
        categories: set
            .categories
            .iter()
            .map(|c| RawCategory {
                id: c.id,
                name: c.name.clone(),
            })
            .collect(),
    };
    write_bytes(path, &to_pretty_json(&raw))
}

// ---------------------------------------------------------------------------
// detections

/// Load a detection file and resolve it against `annotations`.
///
/// `model_id` labels the set (detection files themselves carry no model
/// name). File order is preserved. Unknown image ids, scores outside
/// `[0, 1]` and malformed boxes are rejected with their record index.
pub fn load_detections(
    path: impl AsRef<Path>,
    annotations: &AnnotationSet,
    model_id: impl Into<String>,
) -> Result<DetectionSet> {
    let path = path.as_ref();
    let model_id = model_id.into();
    let raw: Vec<RawDetection> =
        serde_json::from_str(&read_file(path)?).map_err(|e| parse_error(path, e))?;
    let sizes: BTreeMap<&str, ImageSize> = annotations
        .images
        .iter()
        .map(|img| (img.id.as_str(), img.size))
        .collect();

    let mut detections = Vec::with_capacity(raw.len());
    for (i, det) in raw.into_iter().enumerate() {
        let image_id = det.image_id.into_string();
        let size = *sizes
            .get(image_id.as_str())
            .ok_or_else(|| record_error(path, i, format!("unknown image id {image_id:?}")))?;
        if !(det.score.is_finite() && (0.0..=1.0).contains(&det.score)) {
            return Err(record_error(
                path,
                i,
                format!("score {} outside [0, 1]", det.score),
            ));
        }
        let [x, y, w, h] = det.bbox;
        let bbox = to_normalized(PixelBox::from_xywh(x, y, w, h), size)
            .map_err(|e| record_error(path, i, e.to_string()))?;
        detections.push(Detection {
            image_id,
            bbox,
            score: det.score,
            category: det.category_id,
            model_id: Some(model_id.clone()),
        });
    }
    Ok(DetectionSet {
        model_id,
        detections,
    })
}

/// Write detections as a flat JSON array, converting boxes back to pixel
/// `[x, y, w, h]` against the annotation set's image sizes.
pub fn save_detections(
    set: &DetectionSet,
    annotations: &AnnotationSet,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let sizes: BTreeMap<&str, ImageSize> = annotations
        .images
        .iter()
        .map(|img| (img.id.as_str(), img.size))
        .collect();
    let raw: Vec<RawDetection> = set
        .detections
        .iter()
        .enumerate()
        .map(|(i, det)| {
            let size = sizes.get(det.image_id.as_str()).copied().ok_or_else(|| {
                record_error(
                    path,
                    i,
                    format!("detection references unknown image {:?}", det.image_id),
                )
            })?;
            let px = to_pixel(&det.bbox, size);
            Ok(RawDetection {
                image_id: RawId::from_string(&det.image_id),
                category_id: det.category,
                bbox: [px.x1, px.y1, px.x2 - px.x1, px.y2 - px.y1],
                score: det.score,
            })
        })
        .collect::<Result<_>>()?;
    write_bytes(path, &to_pretty_json(&raw))
}
