//! Error type shared across the library.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! (file path, record index, offending value) that a caller can print the
//! error and know which input to fix; loaders reject malformed records rather
//! than repairing them.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by this library.
#[derive(Debug)]
pub enum Error {
    /// A bounding box violated `x1 < x2 && y1 < y2` or left `[0, 1]`.
    InvalidBox { detail: String },
    /// An image dimension was zero.
    InvalidImageSize { width: u32, height: u32 },
    /// A pixel-space rectangle fell outside its image.
    OutOfBounds { detail: String },
    /// A threshold parameter left its documented range.
    InvalidThreshold { name: &'static str, value: f64 },
    /// A confidence score left `[0, 1]`.
    InvalidScore { value: f64, context: String },
    /// A single-image operation saw detections or ground truth from two images.
    MixedImageIds { expected: String, found: String },
    /// An operation that needs ground truth received an empty set.
    EmptyGroundTruth,
    /// LRP is undefined when there are no detections and no ground truth.
    NoSamples,
    /// Fusion requires at least one model run.
    EmptyRuns,
    /// A model weight was not strictly positive.
    InvalidWeight { model_id: String, weight: f64 },
    /// The same model id appeared twice in one run list or pool.
    DuplicateModel { model_id: String },
    /// Ensemble search needs at least two models to combine.
    PoolTooSmall { size: usize },
    /// A detection referenced an image id absent from the annotation set.
    UnknownImage { image_id: String, context: String },
    /// The CLAHE tile grid does not fit inside the image.
    GridTooLarge {
        width: u32,
        height: u32,
        tiles_x: u32,
        tiles_y: u32,
    },
    /// A parameter combination was rejected before any work started.
    InvalidConfig { detail: String },
    /// A file could not be parsed at all (syntax, missing header, ...).
    Parse { path: PathBuf, detail: String },
    /// One record inside an otherwise readable file was malformed.
    Record {
        path: PathBuf,
        index: usize,
        detail: String,
    },
    /// An underlying I/O failure, tagged with the path being touched.
    Io { path: PathBuf, source: io::Error },
    /// A PNG could not be decoded or encoded.
    Image { path: PathBuf, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidBox { detail } => write!(f, "invalid box: {detail}"),
            Error::InvalidImageSize { width, height } => {
                write!(
                    f,
                    "invalid image size {width}x{height}: both sides must be >= 1"
                )
            }
            Error::OutOfBounds { detail } => write!(f, "box outside image bounds: {detail}"),
            Error::InvalidThreshold { name, value } => {
                write!(f, "{name} = {value} is outside its valid range")
            }
            Error::InvalidScore { value, context } => {
                write!(f, "score {value} outside [0, 1] ({context})")
            }
            Error::MixedImageIds { expected, found } => {
                write!(f, "expected image id {expected:?} but found {found:?}")
            }
            Error::EmptyGroundTruth => {
                write!(f, "ground-truth set is empty: recall undefined")
            }
            Error::NoSamples => {
                write!(f, "LRP undefined: no detections and no ground truth")
            }
            Error::EmptyRuns => write!(f, "fusion needs at least one model run"),
            Error::InvalidWeight { model_id, weight } => {
                write!(f, "model {model_id:?} has non-positive weight {weight}")
            }
            Error::DuplicateModel { model_id } => {
                write!(f, "model id {model_id:?} appears more than once")
            }
            Error::PoolTooSmall { size } => {
                write!(f, "ensemble search needs at least 2 models, got {size}")
            }
            Error::UnknownImage { image_id, context } => {
                write!(f, "unknown image id {image_id:?} ({context})")
            }
            Error::GridTooLarge {
                width,
                height,
                tiles_x,
                tiles_y,
            } => write!(
                f,
                "CLAHE grid {tiles_x}x{tiles_y} does not fit a {width}x{height} image; \
                 use a grid no larger than the image"
            ),
            Error::InvalidConfig { detail } => write!(f, "invalid configuration: {detail}"),
            Error::Parse { path, detail } => {
                write!(f, "failed to parse {}: {detail}", path.display())
            }
            Error::Record {
                path,
                index,
                detail,
            } => write!(f, "bad record {index} in {}: {detail}", path.display()),
            // The underlying io::Error is exposed via `source()`, not
            // repeated here, so chain-printing callers see it exactly once.
            Error::Io { path, .. } => write!(f, "I/O error on {}", path.display()),
            Error::Image { path, detail } => {
                write!(f, "image error on {}: {detail}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
