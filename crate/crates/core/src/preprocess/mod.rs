//! Grayscale X-ray preprocessing and augmentation.
//!
//! The pipeline, in application order: detect the dominant background with
//! a binary k-means over the intensity histogram and invert images whose
//! background is light ([`invert_if_light`]), equalize contrast with CLAHE
//! ([`clahe`]), rescale to 800×800 ([`rescale`]), and optionally apply a
//! seeded flip + brightness/contrast augmentation ([`augment`]).
//!
//! Everything operates on [`GrayImage`], a plain row-major 8-bit buffer, and
//! on normalized boxes, which makes every step except the horizontal flip a
//! box no-op. All operations are pure and deterministic; augmentation draws
//! from a counter-based RNG seeded per image, so batch runs can process
//! images in parallel and still match a sequential run byte for byte.

mod clahe;
mod png;

pub use clahe::{clahe, ClaheParams};
pub use png::{load_gray_png, save_gray_png, save_rgb_png};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Side length every image is rescaled to before training or inference.
pub const RESCALE_SIZE: u32 = 800;

/// An 8-bit grayscale image: row-major intensities, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Wrap a row-major pixel buffer. The buffer length must be exactly
    /// `width × height` and both sides must be at least 1.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImageSize { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "pixel buffer holds {} values, expected {expected} for a {width}x{height} image",
                    pixels.len()
                ),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// An image with every pixel at `value`.
    pub fn constant(width: u32, height: u32, value: u8) -> Result<Self> {
        let count = width as usize * height as usize;
        GrayImage::new(width, height, vec![value; count])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixel data, length `width × height`.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`. Panics outside the image.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Which side of the intensity range dominates an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    Dark,
    Light,
}

/// Classify the dominant background via binary k-means on the intensity
/// histogram.
///
/// Centroids start at 0 and 255 and Lloyd iterations run to convergence
/// (at most 100). The cluster holding more pixels is the background — ties
/// go to the darker cluster — and it counts as light when its centroid
/// exceeds 127.5. Deterministic: histogram k-means has no random
/// initialization.
pub fn dominant_background(img: &GrayImage) -> Background {
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        hist[p as usize] += 1;
    }

    // Assign every populated bin to the nearer centroid (ties to the darker
    // one) and return the per-cluster pixel counts and intensity sums.
    let assign = |c0: f64, c1: f64| -> (u64, f64, u64, f64) {
        let mut acc = (0u64, 0.0f64, 0u64, 0.0f64);
        for (bin, &count) in hist.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let x = bin as f64;
            let mass = x * count as f64;
            if (x - c0).abs() <= (x - c1).abs() {
                acc.0 += count;
                acc.1 += mass;
            } else {
                acc.2 += count;
                acc.3 += mass;
            }
        }
        acc
    };

    let (mut c0, mut c1) = (0.0f64, 255.0f64);
    for _ in 0..100 {
        let (n0, s0, n1, s1) = assign(c0, c1);
        // An empty cluster keeps its centroid so the pair stays binary.
        let next0 = if n0 > 0 { s0 / n0 as f64 } else { c0 };
        let next1 = if n1 > 0 { s1 / n1 as f64 } else { c1 };
        if next0 == c0 && next1 == c1 {
            break;
        }
        c0 = next0;
        c1 = next1;
    }

    let (n0, _, n1, _) = assign(c0, c1);
    let background_centroid = if n1 > n0 { c1 } else { c0 };
    if background_centroid > 127.5 {
        Background::Light
    } else {
        Background::Dark
    }
}

/// Invert the image when its dominant background is light, so that all
/// downstream processing sees dark-background radiographs.
///
/// Idempotent: the inverted output classifies as dark, so a second pass is
/// the identity.
pub fn invert_if_light(img: &GrayImage) -> GrayImage {
    match dominant_background(img) {
        Background::Dark => img.clone(),
        Background::Light => GrayImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|&p| 255 - p).collect(),
        },
    }
}

/// Mirror the image left-to-right.
pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for row in img.pixels.chunks(img.width as usize) {
        pixels.extend(row.iter().rev());
    }
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Bilinear resample to `width × height`.
///
/// Sample positions follow the half-pixel convention
/// `src = (dst + 0.5) · scale − 0.5`, which makes a same-size resize the
/// exact identity.
pub fn resize_bilinear(img: &GrayImage, width: u32, height: u32) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImageSize { width, height });
    }
    let src_w = img.width as usize;
    let src_h = img.height as usize;
    let scale_x = img.width as f64 / width as f64;
    let scale_y = img.height as f64 / height as f64;
    let mut pixels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let wy = fy - y0 as f64;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let wx = fx - x0 as f64;
            let p = |row: usize, col: usize| img.pixels[row * src_w + col] as f64;
            let top = (1.0 - wx) * p(y0, x0) + wx * p(y0, x1);
            let bottom = (1.0 - wx) * p(y1, x0) + wx * p(y1, x1);
            let value = (1.0 - wy) * top + wy * bottom;
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Rescale to [`RESCALE_SIZE`]². Normalized boxes are resolution-independent
/// and pass through unchanged.
pub fn rescale(img: &GrayImage, boxes: &[BBox]) -> Result<(GrayImage, Vec<BBox>)> {
    let resized = resize_bilinear(img, RESCALE_SIZE, RESCALE_SIZE)?;
    Ok((resized, boxes.to_vec()))
}

/// Augmentation configuration: flip chance, brightness/contrast draw ranges
/// and the RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Chance of a horizontal flip, in [0, 1].
    pub flip_probability: f64,
    /// Inclusive range the brightness shift is drawn from.
    pub brightness_delta: (f64, f64),
    /// Inclusive range the contrast factor is drawn from; must be positive.
    pub contrast_factor: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            flip_probability: 0.5,
            brightness_delta: (-25.5, 25.5),
            contrast_factor: (0.8, 1.2),
            seed: 0,
        }
    }
}

impl AugmentParams {
    /// Parameters for the image at `index` in a batch: same configuration,
    /// seed offset by the index. Gives every image an independent stream so
    /// parallel and sequential batch runs agree.
    pub fn for_image_index(&self, index: u64) -> AugmentParams {
        AugmentParams {
            seed: self.seed.wrapping_add(index),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.flip_probability >= 0.0 && self.flip_probability <= 1.0) {
            return Err(Error::InvalidThreshold {
                name: "flip_probability",
                value: self.flip_probability,
            });
        }
        let (b_lo, b_hi) = self.brightness_delta;
        if !(b_lo.is_finite() && b_hi.is_finite() && b_lo <= b_hi) {
            return Err(Error::InvalidConfig {
                detail: format!("brightness_delta range ({b_lo}, {b_hi}) is not an interval"),
            });
        }
        let (c_lo, c_hi) = self.contrast_factor;
        if !(c_lo.is_finite() && c_hi.is_finite() && 0.0 < c_lo && c_lo <= c_hi) {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "contrast_factor range ({c_lo}, {c_hi}) must be a positive interval"
                ),
            });
        }
        Ok(())
    }
}

/// What one augmentation call actually drew and applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedOps {
    pub flipped: bool,
    pub contrast_factor: f64,
    pub brightness_delta: f64,
}

/// Seeded flip + brightness/contrast augmentation.
///
/// Three values are always drawn, in a fixed order — flip roll, contrast
/// factor, brightness delta — so the stream position never depends on the
/// flip outcome. A flip mirrors pixels and reflects each box
/// `(x1, y1, x2, y2)` to `(1−x2, y1, 1−x1, y2)`; brightness/contrast maps
/// every pixel to `contrast · (p − 128) + 128 + brightness`, rounded and
/// clamped to [0, 255]. Same parameters (including seed) → same output.
pub fn augment(
    img: &GrayImage,
    boxes: &[BBox],
    params: &AugmentParams,
) -> Result<(GrayImage, Vec<BBox>, AppliedOps)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let roll: f64 = rng.random();
    let flipped = roll < params.flip_probability;
    let contrast = rng.random_range(params.contrast_factor.0..=params.contrast_factor.1);
    let brightness = rng.random_range(params.brightness_delta.0..=params.brightness_delta.1);

    let (mut out, out_boxes) = if flipped {
        (
            flip_horizontal(img),
            boxes.iter().map(BBox::flip_horizontal).collect(),
        )
    } else {
        (img.clone(), boxes.to_vec())
    };
    for p in &mut out.pixels {
        let value = contrast * (*p as f64 - 128.0) + 128.0 + brightness;
        *p = value.round().clamp(0.0, 255.0) as u8;
    }
    Ok((
        out,
        out_boxes,
        AppliedOps {
            flipped,
            contrast_factor: contrast,
            brightness_delta: brightness,
        },
    ))
}
