//! PNG input/output for grayscale images.
//!
//! Reads any PNG and collapses it to 8-bit luma; writes either 8-bit
//! grayscale or, for consumers that expect three channels, an RGB PNG with
//! the gray value replicated per channel.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;

fn image_error(path: &Path, detail: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

/// Load a PNG as 8-bit grayscale. Non-gray inputs are converted with the
/// standard luma weights; already-gray files load unchanged.
pub fn load_gray_png(path: &Path) -> Result<GrayImage> {
    let decoded = image::open(path).map_err(|e| image_error(path, e))?;
    let gray = decoded.to_luma8();
    GrayImage::new(gray.width(), gray.height(), gray.into_raw())
}

/// Write an 8-bit grayscale PNG.
pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    let buffer: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width(), img.height(), img.pixels().to_vec())
            .expect("pixel count matches dimensions by GrayImage invariant");
    buffer
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

/// Write a 3-channel PNG with the gray value replicated into R, G and B.
pub fn save_rgb_png(img: &GrayImage, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(img.pixels().len() * 3);
    for &p in img.pixels() {
        data.extend_from_slice(&[p, p, p]);
    }
    let buffer: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width(), img.height(), data)
            .expect("pixel count matches dimensions by GrayImage invariant");
    buffer
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}
