// SPDX-License-Identifier: Apache-2.0

//! Grid primitives shared by the encoder, decoder and evaluator.
//!
//! Conventions used throughout:
//! - grids are row-major, `x` indexes columns and `y` rows;
//! - thresholding is inclusive (`value >= theta`);
//! - foreground connectivity is 8-neighbour;
//! - ties between equal values resolve to the topmost, then leftmost cell.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{Cell, CellRect};
use crate::scalar::{idx, Scalar};

/// Row-major grid of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "map dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(invalid(format!(
                "map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, v: T) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        Self {
            width,
            height,
            values: vec![v; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, c: Cell) -> T {
        self.get(c.x, c.y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn bounds(&self) -> CellRect {
        CellRect::new(0, 0, self.width - 1, self.height - 1)
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Global maximum and its first location in row-major order.
    pub fn argmax(&self) -> (T, Cell) {
        roi_max(self, self.bounds()).expect("full bounds always intersect")
    }

    pub fn is_unit_range(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.values {
            *v = v.max(T::zero()).min(T::one());
        }
    }

    /// Copy of the sub-grid covered by `rect`.
    pub fn crop(&self, rect: CellRect) -> Result<Self> {
        let rect = rect
            .intersect(&self.bounds())
            .ok_or_else(|| invalid(format!("crop {rect:?} lies outside the map")))?;
        let mut values = Vec::with_capacity(rect.width() * rect.height());
        for y in rect.y0..=rect.y1 {
            values.extend_from_slice(&self.row(y)[rect.x0..=rect.x1]);
        }
        Ok(Self {
            width: rect.width(),
            height: rect.height(),
            values,
        })
    }

    pub fn cast<U: Scalar>(&self) -> SaliencyMap<U> {
        SaliencyMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(invalid(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: usize,
    pub pixel_count: usize,
    /// Tight hull of `pixels`.
    pub extent: CellRect,
    pub pixels: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// A column at a fixed `x`.
    Vertical,
    /// A row at a fixed `y`.
    Horizontal,
}

fn check_unit_theta<T: Scalar>(theta: T) -> Result<()> {
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(invalid(format!("threshold must lie in [0, 1], got {theta}")));
    }
    Ok(())
}

pub fn threshold_map<T: Scalar>(map: &SaliencyMap<T>, theta: T) -> Result<BinaryMask> {
    check_unit_theta(theta)?;
    Ok(BinaryMask {
        width: map.width,
        height: map.height,
        bits: map.values.iter().map(|&v| v >= theta).collect(),
    })
}

/// Normalized discrete Gaussian of radius `ceil(3 * sigma)`. A zero sigma yields `[1]`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(invalid(format!(
            "blur sigma must be a finite non-negative value, got {sigma}"
        )));
    }
    if sigma == T::zero() {
        return Ok(vec![T::one()]);
    }
    let radius = (T::of(3.0) * sigma)
        .ceil()
        .to_usize()
        .expect("radius fits in usize");
    let denom = T::of(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = idx::<T>(i) - idx::<T>(radius);
            (-(d * d) / denom).exp()
        })
        .collect();
    let total: T = raw.iter().copied().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur<T: Scalar>(map: &SaliencyMap<T>, sigma: T) -> Result<SaliencyMap<T>> {
    let kernel = gaussian_kernel(sigma)?;
    if kernel.len() == 1 {
        return Ok(map.clone());
    }
    let (w, h) = (map.width, map.height);
    let r = kernel.len() / 2;

    // Horizontal pass over an edge-padded row buffer.
    let mut horiz = vec![T::zero(); w * h];
    let mut padded = vec![T::zero(); w + 2 * r];
    for y in 0..h {
        let row = map.row(y);
        padded[..r].fill(row[0]);
        padded[r..r + w].copy_from_slice(row);
        padded[r + w..].fill(row[w - 1]);
        let out = &mut horiz[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let window = &padded[x..x + kernel.len()];
            *o = window
                .iter()
                .zip(&kernel)
                .fold(T::zero(), |acc, (&v, &k)| acc + v * k);
        }
    }

    // Vertical pass as row-wise accumulation.
    let (lo, hi) = map.min_max();
    let mut values = vec![T::zero(); w * h];
    for y in 0..h {
        let out = &mut values[y * w..(y + 1) * w];
        for (k, &kw) in kernel.iter().enumerate() {
            let sy = (y + k).saturating_sub(r).min(h - 1);
            let src = &horiz[sy * w..(sy + 1) * w];
            for (o, &s) in out.iter_mut().zip(src) {
                *o = *o + kw * s;
            }
        }
        // Rounding can push a convex combination a few ulps outside the input range.
        for o in out.iter_mut() {
            *o = o.max(lo).min(hi);
        }
    }
    Ok(SaliencyMap {
        width: w,
        height: h,
        values,
    })
}

/// Source index pair and blend weight for one output coordinate.
fn bilinear_taps<T: Scalar>(out_len: usize, in_len: usize) -> Vec<(usize, usize, T)> {
    let scale = idx::<T>(in_len) / idx::<T>(out_len);
    let max = idx::<T>(in_len - 1);
    (0..out_len)
        .map(|d| {
            let s = ((idx::<T>(d) + T::half()) * scale - T::half())
                .max(T::zero())
                .min(max);
            let i0 = s.floor().to_usize().expect("clamped source coordinate");
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - idx::<T>(i0))
        })
        .collect()
}

/// Bilinear resampling with half-pixel centers; source coordinates are clamped to the grid.
pub fn upsample_bilinear<T: Scalar>(
    map: &SaliencyMap<T>,
    out_w: usize,
    out_h: usize,
) -> Result<SaliencyMap<T>> {
    if out_w == 0 || out_h == 0 {
        return Err(invalid(format!(
            "output dimensions must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == map.width && out_h == map.height {
        return Ok(map.clone());
    }
    let xs = bilinear_taps::<T>(out_w, map.width);
    let ys = bilinear_taps::<T>(out_h, map.height);

    // Resample every source row horizontally once, then blend row pairs.
    let mut rows = vec![T::zero(); out_w * map.height];
    for y in 0..map.height {
        let src = map.row(y);
        let dst = &mut rows[y * out_w..(y + 1) * out_w];
        for (o, &(i0, i1, f)) in dst.iter_mut().zip(&xs) {
            *o = src[i0] + (src[i1] - src[i0]) * f;
        }
    }
    let (lo, hi) = map.min_max();
    let mut values = Vec::with_capacity(out_w * out_h);
    for &(j0, j1, f) in &ys {
        let a = &rows[j0 * out_w..(j0 + 1) * out_w];
        let b = &rows[j1 * out_w..(j1 + 1) * out_w];
        values.extend(a.iter().zip(b).map(|(&p, &q)| (p + (q - p) * f).max(lo).min(hi)));
    }
    Ok(SaliencyMap {
        width: out_w,
        height: out_h,
        values,
    })
}

/// Sparse 1-D linear map: output `i` is `sum_k weights[k] * src[start + k]` for `rows[i]`.
#[derive(Debug, Clone)]
struct AxisOperator<T> {
    rows: Vec<(usize, Vec<T>)>,
}

impl<T: Scalar> AxisOperator<T> {
    fn bilinear(out_len: usize, in_len: usize) -> Self {
        let rows = bilinear_taps::<T>(out_len, in_len)
            .into_iter()
            .map(|(i0, i1, f)| {
                if i1 == i0 {
                    (i0, vec![T::one()])
                } else {
                    (i0, vec![T::one() - f, f])
                }
            })
            .collect();
        Self { rows }
    }

    /// Convolution with edge replication, folded onto the valid index range.
    fn blur(len: usize, kernel: &[T]) -> Self {
        let r = kernel.len() / 2;
        let rows = (0..len)
            .map(|i| {
                let start = i.saturating_sub(r);
                let end = (i + r).min(len - 1);
                let mut w = vec![T::zero(); end - start + 1];
                for (k, &kw) in kernel.iter().enumerate() {
                    let src = (i + k).saturating_sub(r).min(len - 1);
                    w[src - start] = w[src - start] + kw;
                }
                (start, w)
            })
            .collect();
        Self { rows }
    }

    /// `self` applied after `first`.
    fn after(&self, first: &Self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|(start, weights)| {
                let spans = weights
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| (&first.rows[start + k], w));
                let lo = spans.clone().map(|((s, _), _)| *s).min().expect("non-empty row");
                let hi = spans
                    .clone()
                    .map(|((s, v), _)| s + v.len())
                    .max()
                    .expect("non-empty row");
                let mut out = vec![T::zero(); hi - lo];
                for ((s, v), w) in spans {
                    for (j, &fv) in v.iter().enumerate() {
                        out[s + j - lo] = out[s + j - lo] + w * fv;
                    }
                }
                (lo, out)
            })
            .collect();
        Self { rows }
    }
}

/// [`upsample_bilinear`] followed by [`gaussian_blur`], computed as one sparse operator per
/// axis. Equal to the two-step result up to rounding.
pub fn resample_smooth<T: Scalar>(
    map: &SaliencyMap<T>,
    out_w: usize,
    out_h: usize,
    sigma: T,
) -> Result<SaliencyMap<T>> {
    if out_w == 0 || out_h == 0 {
        return Err(invalid(format!(
            "output dimensions must be positive, got {out_w}x{out_h}"
        )));
    }
    let kernel = gaussian_kernel(sigma)?;
    let xs = AxisOperator::blur(out_w, &kernel).after(&AxisOperator::bilinear(out_w, map.width));
    let ys = AxisOperator::blur(out_h, &kernel).after(&AxisOperator::bilinear(out_h, map.height));

    let mut rows = vec![T::zero(); out_w * map.height];
    for y in 0..map.height {
        let src = map.row(y);
        for (o, (start, w)) in rows[y * out_w..(y + 1) * out_w].iter_mut().zip(&xs.rows) {
            *o = src[*start..*start + w.len()]
                .iter()
                .zip(w)
                .fold(T::zero(), |acc, (&v, &k)| acc + v * k);
        }
    }
    let (lo, hi) = map.min_max();
    let mut values = vec![T::zero(); out_w * out_h];
    for (y, (start, w)) in ys.rows.iter().enumerate() {
        let out = &mut values[y * out_w..(y + 1) * out_w];
        for (k, &kw) in w.iter().enumerate() {
            let src = &rows[(start + k) * out_w..(start + k + 1) * out_w];
            for (o, &s) in out.iter_mut().zip(src) {
                *o = *o + kw * s;
            }
        }
        for o in out.iter_mut() {
            *o = o.max(lo).min(hi);
        }
    }
    Ok(SaliencyMap {
        width: out_w,
        height: out_h,
        values,
    })
}

/// 8-connected labeling. Components are ordered by their first pixel in raster order.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push(Cell::new(x, y));
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask.bits[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable_by_key(|c| c.raster_key());
        out.push(Component {
            id: out.len(),
            pixel_count: pixels.len(),
            extent: CellRect::new(x0, y0, x1, y1),
            pixels,
        });
    }
    out
}

/// Maximum inside `roi` (clipped to the map) and its first row-major location.
pub fn roi_max<T: Scalar>(map: &SaliencyMap<T>, roi: CellRect) -> Result<(T, Cell)> {
    let roi = roi
        .intersect(&map.bounds())
        .ok_or_else(|| invalid(format!("roi {roi:?} does not intersect the map")))?;
    let mut best = (map.get(roi.x0, roi.y0), Cell::new(roi.x0, roi.y0));
    for y in roi.y0..=roi.y1 {
        let row = map.row(y);
        for (dx, &v) in row[roi.x0..=roi.x1].iter().enumerate() {
            if v > best.0 {
                best = (v, Cell::new(roi.x0 + dx, y));
            }
        }
    }
    Ok(best)
}

/// Maximum along a full-extent column (`Vertical`) or row (`Horizontal`).
pub fn line_max<T: Scalar>(map: &SaliencyMap<T>, orientation: Orientation, position: usize) -> Result<T> {
    match orientation {
        Orientation::Vertical => {
            if position >= map.width {
                return Err(invalid(format!(
                    "column {position} outside map of width {}",
                    map.width
                )));
            }
            Ok((0..map.height)
                .map(|y| map.get(position, y))
                .fold(T::neg_infinity(), T::max))
        }
        Orientation::Horizontal => {
            if position >= map.height {
                return Err(invalid(format!(
                    "row {position} outside map of height {}",
                    map.height
                )));
            }
            Ok(map.row(position).iter().copied().fold(T::neg_infinity(), T::max))
        }
    }
}

/// Maximum over a component's member pixels, first in raster order on ties.
pub(crate) fn component_argmax<T: Scalar>(map: &SaliencyMap<T>, comp: &Component) -> (T, Cell) {
    let mut best = (map.at(comp.pixels[0]), comp.pixels[0]);
    for &c in &comp.pixels[1..] {
        let v = map.at(c);
        if v > best.0 {
            best = (v, c);
        }
    }
    best
}
