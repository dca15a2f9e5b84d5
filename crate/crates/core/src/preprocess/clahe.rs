//! Contrast-limited adaptive histogram equalization.
//!
//! The classical tile-based scheme: the image is split into a fixed grid,
//! each tile gets an equalization lookup table built from its clipped
//! histogram, and every output pixel bilinearly blends the tables of the
//! four surrounding tile centers. Fully deterministic.
//!
//! Conventions this implementation pins down (the parameter names alone do
//! not fix them):
//!
//! - Tile boundaries for a non-divisible image side are `round(i·size/tiles)`.
//! - The clip ceiling is relative: `max(1, ⌊clip_limit · tile_pixels / 256⌋)`.
//! - Clipped excess is redistributed in one uniform pass, the remainder
//!   dealt round-robin from bin 0.
//! - A tile whose histogram occupies a single bin keeps the identity
//!   mapping, so constant regions (and constant images) pass through
//!   unchanged instead of being pulled toward an arbitrary level.

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;

/// CLAHE configuration: tile grid and relative clip limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaheParams {
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Clip ceiling as a multiple of the uniform bin height
    /// `tile_pixels / 256`; values ≥ 256 disable clipping entirely.
    pub clip_limit: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        ClaheParams {
            tiles_x: 11,
            tiles_y: 11,
            clip_limit: 7.0,
        }
    }
}

impl ClaheParams {
    fn validate(&self) -> Result<()> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "CLAHE grid {}x{} needs at least one tile per axis",
                    self.tiles_x, self.tiles_y
                ),
            });
        }
        if !(self.clip_limit.is_finite() && self.clip_limit > 0.0) {
            return Err(Error::InvalidConfig {
                detail: format!("CLAHE clip limit {} must be positive", self.clip_limit),
            });
        }
        Ok(())
    }
}

/// Tile boundaries `round(i·size/tiles)` for `i` in `0..=tiles`. Strictly
/// increasing whenever `size ≥ tiles`.
fn boundaries(size: u32, tiles: u32) -> Vec<usize> {
    (0..=tiles)
        .map(|i| (i as u64 * size as u64) as f64 / tiles as f64)
        .map(|b| b.round() as usize)
        .collect()
}

/// Centers of the intervals `[bounds[i], bounds[i+1])` on the pixel lattice.
fn centers(bounds: &[usize]) -> Vec<f64> {
    bounds
        .windows(2)
        .map(|w| (w[0] + w[1] - 1) as f64 / 2.0)
        .collect()
}

/// Equalization lookup table for one tile histogram of `total` pixels.
fn tile_lut(hist: &mut [u64; 256], total: u64, clip_limit: f64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        // Single-intensity tile: equalization is meaningless, keep identity.
        for (v, out) in lut.iter_mut().enumerate() {
            *out = v as u8;
        }
        return lut;
    }

    let clip = ((clip_limit * total as f64 / 256.0).floor() as u64).max(1);
    let mut excess = 0u64;
    for bin in hist.iter_mut() {
        if *bin > clip {
            excess += *bin - clip;
            *bin = clip;
        }
    }
    let share = excess / 256;
    let remainder = (excess % 256) as usize;
    for (i, bin) in hist.iter_mut().enumerate() {
        *bin += share + u64::from(i < remainder);
    }

    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count;
        lut[v] = (cdf as f64 * 255.0 / total as f64)
            .round()
            .clamp(0.0, 255.0) as u8;
    }
    lut
}

/// Index pair and blend fraction locating `x` between tile centers.
/// Positions outside the center lattice clamp to the edge tile.
fn blend(x: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if x <= centers[0] {
        return (0, 0, 0.0);
    }
    if x >= centers[last] {
        return (last, last, 0.0);
    }
    let left = centers.partition_point(|&c| c <= x) - 1;
    let fraction = (x - centers[left]) / (centers[left + 1] - centers[left]);
    (left, left + 1, fraction)
}

/// Contrast-limited adaptive histogram equalization.
///
/// Requires the image to be at least one pixel per tile on each axis.
/// Output stays in [0, 255]; constant images are returned unchanged.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    params.validate()?;
    if img.width() < params.tiles_x || img.height() < params.tiles_y {
        return Err(Error::GridTooLarge {
            width: img.width(),
            height: img.height(),
            tiles_x: params.tiles_x,
            tiles_y: params.tiles_y,
        });
    }

    let width = img.width() as usize;
    let xs = boundaries(img.width(), params.tiles_x);
    let ys = boundaries(img.height(), params.tiles_y);

    // One LUT per tile, row-major over the grid.
    let mut luts: Vec<[u8; 256]> =
        Vec::with_capacity(params.tiles_x as usize * params.tiles_y as usize);
    for ty in 0..params.tiles_y as usize {
        for tx in 0..params.tiles_x as usize {
            let mut hist = [0u64; 256];
            let mut total = 0u64;
            for y in ys[ty]..ys[ty + 1] {
                for x in xs[tx]..xs[tx + 1] {
                    hist[img.pixels()[y * width + x] as usize] += 1;
                    total += 1;
                }
            }
            luts.push(tile_lut(&mut hist, total, params.clip_limit));
        }
    }
    let lut_at = |tx: usize, ty: usize| &luts[ty * params.tiles_x as usize + tx];

    let cx = centers(&xs);
    let cy = centers(&ys);
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..img.height() as usize {
        let (ty0, ty1, fy) = blend(y as f64, &cy);
        for x in 0..width {
            let (tx0, tx1, fx) = blend(x as f64, &cx);
            let v = img.pixels()[y * width + x] as usize;
            let top = (1.0 - fx) * lut_at(tx0, ty0)[v] as f64 + fx * lut_at(tx1, ty0)[v] as f64;
            let bottom = (1.0 - fx) * lut_at(tx0, ty1)[v] as f64 + fx * lut_at(tx1, ty1)[v] as f64;
            let value = (1.0 - fy) * top + fy * bottom;
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(img.width(), img.height(), pixels)
}
