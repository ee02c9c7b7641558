// SPDX-License-Identifier: Apache-2.0

//! Boxes and grid coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{idx, Scalar};

/// Grid cell coordinate, `x` is the column and `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Row-major ordering key: topmost first, then leftmost.
    pub(crate) fn raster_key(self) -> (usize, usize) {
        (self.y, self.x)
    }
}

/// Axis-aligned rectangle of grid cells, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, y0, x1, y1 }
    }

    pub fn point(c: Cell) -> Self {
        Self::new(c.x, c.y, c.x, c.y)
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.x0..=self.x1).contains(&c.x) && (self.y0..=self.y1).contains(&c.y)
    }

    /// Smallest rectangle covering both.
    pub fn union(&self, other: &CellRect) -> CellRect {
        CellRect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn intersect(&self, other: &CellRect) -> Option<CellRect> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 <= x1 && y0 <= y1).then(|| CellRect::new(x0, y0, x1, y1))
    }

    /// Moves the rectangle by a non-negative offset.
    pub fn offset(&self, dx: usize, dy: usize) -> CellRect {
        CellRect::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }

    /// Pixel-space box whose corners sit on cell boundaries, scaled by `scale`.
    pub fn to_box<T: Scalar>(&self, scale: T) -> BoundingBox<T> {
        BoundingBox::from_corners_unchecked(
            idx::<T>(self.x0) * scale,
            idx::<T>(self.y0) * scale,
            idx::<T>(self.x1 + 1) * scale,
            idx::<T>(self.y1 + 1) * scale,
        )
    }
}

/// Axis-aligned box in center form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        let b = Self::from_corners_unchecked(x0, y0, x1, y1);
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn from_corners_unchecked(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self {
            cx: (x0 + x1) * T::half(),
            cy: (y0 + y1) * T::half(),
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite || self.w <= T::zero() || self.h <= T::zero() {
            return Err(invalid(format!(
                "box needs finite coordinates and positive extent, got {:?}",
                self.to_f64()
            )));
        }
        Ok(())
    }

    pub fn x0(&self) -> T {
        self.cx - self.w * T::half()
    }
    pub fn y0(&self) -> T {
        self.cy - self.h * T::half()
    }
    pub fn x1(&self) -> T {
        self.cx + self.w * T::half()
    }
    pub fn y1(&self) -> T {
        self.cy + self.h * T::half()
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> (T, T, T, T) {
        (self.x0(), self.y0(), self.x1(), self.y1())
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn within(&self, width: T, height: T) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x0 >= T::zero() && y0 >= T::zero() && x1 <= width && y1 <= height
    }

    /// Expands about the center by `factor` and clips to `[0, width] x [0, height]`.
    pub fn scaled_about_center(&self, factor: T, width: T, height: T) -> Self {
        let hw = self.w * factor * T::half();
        let hh = self.h * factor * T::half();
        let x0 = (self.cx - hw).max(T::zero());
        let y0 = (self.cy - hh).max(T::zero());
        let x1 = (self.cx + hw).min(width);
        let y1 = (self.cy + hh).min(height);
        Self::from_corners_unchecked(x0, y0, x1, y1)
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &Self) -> T {
        let iw = (self.x1().min(other.x1()) - self.x0().max(other.x0())).max(T::zero());
        let ih = (self.y1().min(other.y1()) - self.y0().max(other.y0())).max(T::zero());
        let inter = iw * ih;
        if inter <= T::zero() {
            return T::zero();
        }
        // Areas from the same corner differences as the intersection, so iou(a, a) is exactly 1.
        let area = |b: &Self| (b.x1() - b.x0()) * (b.y1() - b.y0());
        let union = area(self) + area(other) - inter;
        (inter / union).min(T::one())
    }

    pub fn to_f64(&self) -> BoundingBox<f64> {
        BoundingBox {
            cx: self.cx.to_f64_lossy(),
            cy: self.cy.to_f64_lossy(),
            w: self.w.to_f64_lossy(),
            h: self.h.to_f64_lossy(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> BoundingBox<U> {
        BoundingBox {
            cx: U::of(self.cx.to_f64_lossy()),
            cy: U::of(self.cy.to_f64_lossy()),
            w: U::of(self.w.to_f64_lossy()),
            h: U::of(self.h.to_f64_lossy()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_round_trip() {
        let b = BoundingBox::from_corners(2.0, 3.0, 10.0, 7.0).unwrap();
        assert_eq!((b.cx, b.cy, b.w, b.h), (6.0, 5.0, 8.0, 4.0));
        assert_eq!(b.corners(), (2.0, 3.0, 10.0, 7.0));
    }

    #[test]
    fn rejects_non_positive_extent() {
        assert!(BoundingBox::new(1.0, 1.0, 0.0, 2.0).is_err());
        assert!(BoundingBox::<f32>::new(1.0, 1.0, 2.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn cell_rect_to_box_uses_cell_boundaries() {
        let b: BoundingBox<f64> = CellRect::new(6, 6, 8, 8).to_box(16.0);
        assert_eq!(b.corners(), (96.0, 96.0, 144.0, 144.0));
    }

    #[test]
    fn scaling_clips_to_frame() {
        let b = BoundingBox::from_corners(0.0, 0.0, 10.0, 10.0).unwrap();
        let s = b.scaled_about_center(2.0, 12.0, 100.0);
        assert_eq!(s.corners(), (0.0, 0.0, 12.0, 15.0));
    }
}
