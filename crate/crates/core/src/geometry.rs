//! Axis-aligned bounding boxes and intersection-over-union.
//!
//! All boxes inside the library live in normalized corner coordinates:
//! `0 <= x1 < x2 <= 1` and `0 <= y1 < y2 <= 1`, relative to image width and
//! height. Pixel-space rectangles only appear at the I/O boundary and are
//! converted through [`to_normalized`] / [`to_pixel`], which keeps every
//! downstream computation resolution-independent.
//!
//! [`BBox`] fields are private so that a value, once constructed, is always a
//! valid non-degenerate box; fusion and metrics rely on that invariant.

use crate::error::{Error, Result};

/// Image dimensions in pixels. Both sides are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSize {
    width: u32,
    height: u32,
}

impl ImageSize {
    /// Build a size, rejecting zero-area images.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImageSize { width, height });
        }
        Ok(ImageSize { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// A rectangle in pixel coordinates, corner form. Produced and consumed at
/// the file-format boundary; carries no validity guarantees of its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    /// Convert from COCO `[x, y, width, height]` form.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        PixelBox {
            x1: x,
            y1: y,
            x2: x + w,
            y2: y + h,
        }
    }
}

/// An axis-aligned box in normalized corner coordinates.
///
/// Invariant: `0 <= x1 < x2 <= 1` and `0 <= y1 < y2 <= 1`, all coordinates
/// finite. Enforced at construction; instances are immutable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    /// Build a box, rejecting degenerate or out-of-range coordinates.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let coords = [x1, y1, x2, y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox {
                detail: format!("non-finite coordinate in ({x1}, {y1}, {x2}, {y2})"),
            });
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::InvalidBox {
                detail: format!(
                    "degenerate box ({x1}, {y1}, {x2}, {y2}): need x1 < x2 and y1 < y2"
                ),
            });
        }
        if x1 < 0.0 || y1 < 0.0 || x2 > 1.0 || y2 > 1.0 {
            return Err(Error::InvalidBox {
                detail: format!("box ({x1}, {y1}, {x2}, {y2}) leaves the unit square"),
            });
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    /// Area in normalized units; strictly positive by construction.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Intersection-over-union with another box.
    ///
    /// Returns a value in `[0, 1]`: `0` for disjoint boxes, `1` exactly when
    /// the boxes coincide. Symmetric in its arguments.
    pub fn iou(&self, other: &BBox) -> f64 {
        iou_corners(
            [self.x1, self.y1, self.x2, self.y2],
            [other.x1, other.y1, other.x2, other.y2],
        )
    }

    /// Mirror the box across the vertical centerline of the image.
    pub fn flip_horizontal(&self) -> BBox {
        BBox {
            x1: 1.0 - self.x2,
            y1: self.y1,
            x2: 1.0 - self.x1,
            y2: self.y2,
        }
    }
}

/// IoU on raw corner quadruples `[x1, y1, x2, y2]`. Shared by [`BBox::iou`]
/// and by fusion, whose in-progress cluster boxes are not yet validated
/// `BBox` values.
pub(crate) fn iou_corners(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    inter / (area_a + area_b - inter)
}

/// Convert a pixel-space rectangle into a normalized [`BBox`].
///
/// Rejects degenerate rectangles and rectangles that leave the image.
pub fn to_normalized(px: PixelBox, size: ImageSize) -> Result<BBox> {
    if !(px.x1 < px.x2 && px.y1 < px.y2) {
        return Err(Error::InvalidBox {
            detail: format!(
                "degenerate pixel box ({}, {}, {}, {})",
                px.x1, px.y1, px.x2, px.y2
            ),
        });
    }
    let (w, h) = (f64::from(size.width()), f64::from(size.height()));
    if px.x1 < 0.0 || px.y1 < 0.0 || px.x2 > w || px.y2 > h {
        return Err(Error::OutOfBounds {
            detail: format!(
                "pixel box ({}, {}, {}, {}) vs image {}x{}",
                px.x1,
                px.y1,
                px.x2,
                px.y2,
                size.width(),
                size.height()
            ),
        });
    }
    BBox::new(px.x1 / w, px.y1 / h, px.x2 / w, px.y2 / h)
}

/// Convert a normalized box back to pixel coordinates.
pub fn to_pixel(b: &BBox, size: ImageSize) -> PixelBox {
    let (w, h) = (f64::from(size.width()), f64::from(size.height()));
    PixelBox {
        x1: b.x1() * w,
        y1: b.y1() * h,
        x2: b.x2() * w,
        y2: b.y2() * h,
    }
}
