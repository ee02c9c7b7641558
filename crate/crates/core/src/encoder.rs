// SPDX-License-Identifier: Apache-2.0

//! Ground-truth saliency maps from box annotations.
//!
//! Each box becomes an axis-aligned Gaussian centred on the map cell containing the box
//! centre, with per-axis standard deviation equal to half the box extent in whole cells,
//! truncated to the cells whose centres fall inside the box. Overlapping boxes add up and
//! the sum is clamped to 1.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{BoundingBox, CellRect};
use crate::raster::SaliencyMap;
use crate::scalar::{idx, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub image_width: u32,
    pub image_height: u32,
    /// Input pixels per map cell.
    pub stride: u32,
}

impl EncoderConfig {
    pub fn new(image_width: u32, image_height: u32, stride: u32) -> Result<Self> {
        let cfg = Self {
            image_width,
            image_height,
            stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if self.image_width / self.stride == 0 || self.image_height / self.stride == 0 {
            return Err(invalid(format!(
                "image {}x{} is smaller than one cell at stride {}",
                self.image_width, self.image_height, self.stride
            )));
        }
        Ok(())
    }

    /// Map dimensions `(floor(W/s), floor(H/s))`.
    pub fn map_dims(&self) -> (usize, usize) {
        (
            (self.image_width / self.stride) as usize,
            (self.image_height / self.stride) as usize,
        )
    }
}

/// Per-box Gaussian in map-cell units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams<T> {
    /// Centre cell `(x, y)`.
    pub mu: (usize, usize),
    pub axis_sigma: (T, T),
    /// Cells where the Gaussian is non-zero.
    pub roi: CellRect,
}

impl<T: Scalar> GaussianParams<T> {
    /// Untruncated Gaussian value at cell `(x, y)`; the peak is 1 at `mu`.
    pub fn value_at(&self, x: usize, y: usize) -> T {
        let dx = idx::<T>(x) - idx::<T>(self.mu.0);
        let dy = idx::<T>(y) - idx::<T>(self.mu.1);
        let (sx, sy) = self.axis_sigma;
        (-T::half() * (dx * dx / (sx * sx) + dy * dy / (sy * sy))).exp()
    }
}

/// Range of cell indices `j` with `lo <= j + 0.5 <= hi`, clamped to `[0, n)`.
fn covered_cells<T: Scalar>(lo: T, hi: T, n: usize) -> Option<(usize, usize)> {
    let first = (lo - T::half()).ceil().max(T::zero());
    let last = (hi - T::half()).floor().min(idx::<T>(n - 1));
    if last < first {
        return None;
    }
    Some((first.to_usize()?, last.to_usize()?))
}

pub fn box_to_gaussian_params<T: Scalar>(
    b: &BoundingBox<T>,
    cfg: &EncoderConfig,
) -> Result<GaussianParams<T>> {
    cfg.validate()?;
    b.validate()?;
    let (iw, ih) = (
        idx::<T>(cfg.image_width as usize),
        idx::<T>(cfg.image_height as usize),
    );
    if !b.within(iw, ih) {
        return Err(invalid(format!(
            "box {:?} lies outside the {}x{} image",
            b.to_f64(),
            cfg.image_width,
            cfg.image_height
        )));
    }
    let s = idx::<T>(cfg.stride as usize);
    let cells_w = (b.w / s).floor();
    let cells_h = (b.h / s).floor();
    if cells_w < T::one() || cells_h < T::one() {
        return Err(Error::DegenerateBox {
            w: b.w.to_f64_lossy(),
            h: b.h.to_f64_lossy(),
            stride: cfg.stride,
        });
    }
    let (gw, gh) = cfg.map_dims();
    let mu_x = (b.cx / s).floor().to_usize().unwrap_or(0).min(gw - 1);
    let mu_y = (b.cy / s).floor().to_usize().unwrap_or(0).min(gh - 1);

    let (x0, y0, x1, y1) = b.corners();
    let degenerate = || Error::DegenerateBox {
        w: b.w.to_f64_lossy(),
        h: b.h.to_f64_lossy(),
        stride: cfg.stride,
    };
    let (rx0, rx1) = covered_cells(x0 / s, x1 / s, gw).ok_or_else(degenerate)?;
    let (ry0, ry1) = covered_cells(y0 / s, y1 / s, gh).ok_or_else(degenerate)?;

    Ok(GaussianParams {
        mu: (mu_x, mu_y),
        axis_sigma: (cells_w * T::half(), cells_h * T::half()),
        roi: CellRect::new(rx0, ry0, rx1, ry1),
    })
}

/// Adds one truncated Gaussian into `map` without clamping.
pub(crate) fn splat<T: Scalar>(map: &mut SaliencyMap<T>, g: &GaussianParams<T>) {
    for y in g.roi.y0..=g.roi.y1 {
        for x in g.roi.x0..=g.roi.x1 {
            let v = map.get(x, y) + g.value_at(x, y);
            map.set(x, y, v);
        }
    }
}

pub fn encode_gt<T: Scalar>(boxes: &[BoundingBox<T>], cfg: &EncoderConfig) -> Result<SaliencyMap<T>> {
    cfg.validate()?;
    let params = boxes
        .iter()
        .map(|b| box_to_gaussian_params(b, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = cfg.map_dims();
    let mut map = SaliencyMap::zeros(w, h);
    for g in &params {
        splat(&mut map, g);
    }
    map.clamp_unit();
    Ok(map)
}
