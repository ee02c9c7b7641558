// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic scenes: known boxes, their encoded maps, and noisy variants.
//!
//! Boxes are cell-aligned: each centre sits on a map-cell centre and each extent is an even
//! number of cells, so the encoded Gaussian is symmetric inside its ROI and reaches exactly
//! `e^-1/2` on the ROI border cells. That makes decoder behaviour on clean scenes
//! predictable from the encoder alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::decoder::DecoderConfig;
use crate::encoder::{box_to_gaussian_params, encode_gt, EncoderConfig};
use crate::error::{invalid, Error, Result};
use crate::geom::{BoundingBox, Cell, CellRect};
use crate::loss::CountCategory;
use crate::raster::SaliencyMap;
use crate::scalar::{idx, Scalar};

/// Largest number of boxes a scene may request.
pub const MAX_BOXES: usize = 6;

/// Mixed into the scene seed so noise draws are independent of box placement.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    /// Number of boxes, `0..=6`.
    pub k: usize,
    /// Minimum number of empty cells between any two ROIs along at least one axis.
    pub min_separation_cells: usize,
    /// Inclusive range of box extents in cells; only even extents are drawn.
    pub size_range: (usize, usize),
    /// Whole-scene placement restarts before giving up.
    pub max_attempts: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 224,
            height: 224,
            stride: 16,
            k: 1,
            min_separation_cells: 3,
            size_range: (2, 4),
            max_attempts: 500,
        }
    }
}

impl SceneParams {
    pub fn with_k(self, k: usize) -> Self {
        Self { k, ..self }
    }

    fn encoder(&self) -> Result<EncoderConfig> {
        EncoderConfig::new(self.width, self.height, self.stride)
    }

    fn even_sizes(&self) -> Vec<usize> {
        let (lo, hi) = self.size_range;
        (lo.max(2)..=hi).filter(|m| m % 2 == 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    pub boxes: Vec<BoundingBox<f64>>,
    pub count_category: CountCategory,
    pub seed: u64,
}

impl SceneSpec {
    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            image_width: self.width,
            image_height: self.height,
            stride: self.stride,
        }
    }

    /// Map-cell ROIs of the boxes, in box order.
    pub fn rois(&self) -> Result<Vec<CellRect>> {
        let cfg = self.encoder();
        self.boxes
            .iter()
            .map(|b| box_to_gaussian_params(b, &cfg).map(|g| g.roi))
            .collect()
    }

    /// Gaussian centres in map cells, in box order.
    pub fn centers(&self) -> Result<Vec<(usize, usize)>> {
        let cfg = self.encoder();
        self.boxes
            .iter()
            .map(|b| box_to_gaussian_params(b, &cfg).map(|g| g.mu))
            .collect()
    }
}

/// Empty cells between two rectangles along the axis where they are furthest apart.
/// Overlapping or touching rectangles have gap 0.
pub fn roi_gap(a: &CellRect, b: &CellRect) -> usize {
    let axis = |a0: usize, a1: usize, b0: usize, b1: usize| {
        if b0 > a1 {
            b0 - a1 - 1
        } else if a0 > b1 {
            a0 - b1 - 1
        } else {
            0
        }
    };
    axis(a.x0, a.x1, b.x0, b.x1).max(axis(a.y0, a.y1, b.y0, b.y1))
}

pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<SceneSpec> {
    if params.k > MAX_BOXES {
        return Err(invalid(format!(
            "scenes hold at most {MAX_BOXES} boxes, asked for {}",
            params.k
        )));
    }
    let enc = params.encoder()?;
    let (gw, gh) = enc.map_dims();
    let sizes: Vec<usize> = params
        .even_sizes()
        .into_iter()
        .filter(|&m| m < gw.min(gh))
        .collect();
    if params.k > 0 && sizes.is_empty() {
        return Err(invalid(format!(
            "size range {:?} has no even extent that fits a {gw}x{gh} map",
            params.size_range
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = params.stride as f64;

    for _ in 0..params.max_attempts.max(1) {
        let mut rois: Vec<CellRect> = Vec::with_capacity(params.k);
        let mut boxes = Vec::with_capacity(params.k);
        for _ in 0..params.k {
            let mut placed = false;
            for _ in 0..64 {
                let mw = sizes[rng.random_range(0..sizes.len())];
                let mh = sizes[rng.random_range(0..sizes.len())];
                let (hw, hh) = (mw / 2, mh / 2);
                let mx = rng.random_range(hw..gw - hw);
                let my = rng.random_range(hh..gh - hh);
                let roi = CellRect::new(mx - hw, my - hh, mx + hw, my + hh);
                if rois
                    .iter()
                    .all(|r| roi_gap(r, &roi) >= params.min_separation_cells)
                {
                    rois.push(roi);
                    boxes.push(BoundingBox {
                        cx: (mx as f64 + 0.5) * s,
                        cy: (my as f64 + 0.5) * s,
                        w: mw as f64 * s,
                        h: mh as f64 * s,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
        if boxes.len() == params.k {
            return Ok(SceneSpec {
                width: params.width,
                height: params.height,
                stride: params.stride,
                count_category: CountCategory::from_count(boxes.len()),
                boxes,
                seed,
            });
        }
    }
    Err(Error::InfeasibleScene {
        k: params.k,
        attempts: params.max_attempts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of per-cell zero-mean Gaussian noise.
    pub additive_sigma: f64,
    pub clutter_blobs: usize,
    /// Peak height of each clutter bump; must stay below the strong-evidence threshold.
    pub clutter_amplitude: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            additive_sigma: 0.0,
            clutter_blobs: 0,
            clutter_amplitude: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.additive_sigma >= 0.0) || !self.additive_sigma.is_finite() {
            return Err(invalid(format!(
                "noise sigma must be non-negative, got {}",
                self.additive_sigma
            )));
        }
        let limit = DecoderConfig::<f64>::DEFAULT_THETA_C;
        if !(0.0..limit).contains(&self.clutter_amplitude) {
            return Err(invalid(format!(
                "clutter amplitude must lie in [0, {limit}), got {}",
                self.clutter_amplitude
            )));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.additive_sigma == 0.0 && (self.clutter_blobs == 0 || self.clutter_amplitude == 0.0)
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// Encoded ground truth plus clutter and additive noise, clamped to `[0, 1]`.
///
/// Clutter bumps are centred outside every ROI and combine by maximum, so the clutter layer
/// never exceeds `clutter_amplitude`.
pub fn render_scene<T: Scalar>(scene: &SceneSpec, noise: &NoiseSpec) -> Result<SaliencyMap<T>> {
    noise.validate()?;
    let boxes: Vec<BoundingBox<T>> = scene.boxes.iter().map(|b| b.cast()).collect();
    let mut map = encode_gt(&boxes, &scene.encoder())?;
    if noise.is_clean() {
        return Ok(map);
    }
    let (w, h) = (map.width(), map.height());
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed ^ NOISE_STREAM);

    if noise.clutter_blobs > 0 && noise.clutter_amplitude > 0.0 {
        let rois = scene.rois()?;
        let mut layer = vec![0.0f64; w * h];
        for _ in 0..noise.clutter_blobs {
            let Some(c) = (0..64)
                .map(|_| Cell::new(rng.random_range(0..w), rng.random_range(0..h)))
                .find(|c| rois.iter().all(|r| !r.contains(*c)))
            else {
                continue;
            };
            let sigma: f64 = rng.random_range(0.75..1.5);
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - c.x as f64).powi(2) + (y as f64 - c.y as f64).powi(2);
                    let v = noise.clutter_amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
                    let slot = &mut layer[y * w + x];
                    *slot = slot.max(v);
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                map.set(x, y, map.get(x, y) + T::of(layer[y * w + x]));
            }
        }
    }

    if noise.additive_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.additive_sigma).map_err(|e| invalid(e.to_string()))?;
        for y in 0..h {
            for x in 0..w {
                let n: f64 = normal.sample(&mut rng);
                map.set(x, y, map.get(x, y) + T::of(n));
            }
        }
    }
    map.clamp_unit();
    Ok(map)
}

/// Gaussian centre of a map cell in input pixels under the half-pixel convention.
pub fn cell_center_px<T: Scalar>(cell: usize, stride: u32) -> T {
    (idx::<T>(cell) + T::half()) * idx::<T>(stride as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::threshold_map;

    #[test]
    fn empty_scene() {
        let s = generate_scene(3, &SceneParams::default().with_k(0)).unwrap();
        assert!(s.boxes.is_empty());
        assert_eq!(s.count_category, CountCategory::Zero);
        let m: SaliencyMap<f64> = render_scene(&s, &NoiseSpec::none()).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SceneParams::default().with_k(3);
        assert_eq!(generate_scene(11, &p).unwrap(), generate_scene(11, &p).unwrap());
        assert_ne!(generate_scene(11, &p).unwrap(), generate_scene(12, &p).unwrap());
        let noise = NoiseSpec {
            additive_sigma: 0.05,
            clutter_blobs: 3,
            clutter_amplitude: 0.4,
        };
        let s = generate_scene(5, &p).unwrap();
        let a: SaliencyMap<f64> = render_scene(&s, &noise).unwrap();
        let b: SaliencyMap<f64> = render_scene(&s, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn separation_holds_exhaustively() {
        let p = SceneParams::default().with_k(3);
        for seed in 0..200 {
            let s = generate_scene(seed, &p).unwrap();
            assert_eq!(s.boxes.len(), 3);
            assert_eq!(s.count_category, CountCategory::ThreePlus);
            let rois = s.rois().unwrap();
            for i in 0..rois.len() {
                for j in i + 1..rois.len() {
                    assert!(roi_gap(&rois[i], &rois[j]) >= 3, "seed {seed}: {:?}", rois);
                }
            }
            for b in &s.boxes {
                assert!(b.within(224.0, 224.0));
                assert!(box_to_gaussian_params(b, &s.encoder()).is_ok());
            }
        }
    }

    #[test]
    fn aligned_boxes_reach_half_sigma_on_roi_border() {
        let p = SceneParams::default().with_k(1);
        for seed in 0..20 {
            let s = generate_scene(seed, &p).unwrap();
            let g = box_to_gaussian_params(&s.boxes[0], &s.encoder()).unwrap();
            let m: SaliencyMap<f64> = render_scene(&s, &NoiseSpec::none()).unwrap();
            let edge = (-0.5f64).exp();
            assert!((m.get(g.roi.x0, g.mu.1) - edge).abs() < 1e-12);
            assert!((m.get(g.roi.x1, g.mu.1) - edge).abs() < 1e-12);
            assert!((m.get(g.mu.0, g.roi.y0) - edge).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_packing_is_reported() {
        let p = SceneParams {
            k: 6,
            size_range: (8, 8),
            max_attempts: 5,
            ..SceneParams::default()
        };
        assert!(matches!(
            generate_scene(1, &p),
            Err(Error::InfeasibleScene { .. })
        ));
        assert!(generate_scene(1, &SceneParams::default().with_k(7)).is_err());
    }

    #[test]
    fn clean_render_matches_encoder() {
        let s = generate_scene(9, &SceneParams::default().with_k(2)).unwrap();
        let m: SaliencyMap<f64> = render_scene(&s, &NoiseSpec::none()).unwrap();
        assert_eq!(m, encode_gt(&s.boxes, &s.encoder()).unwrap());
    }

    #[test]
    fn additive_noise_is_bounded() {
        let s = generate_scene(9, &SceneParams::default().with_k(2)).unwrap();
        let clean: SaliencyMap<f64> = render_scene(&s, &NoiseSpec::none()).unwrap();
        let noise = NoiseSpec {
            additive_sigma: 0.05,
            ..NoiseSpec::none()
        };
        let noisy: SaliencyMap<f64> = render_scene(&s, &noise).unwrap();
        assert!(noisy.is_unit_range());
        assert!(clean
            .values()
            .iter()
            .zip(noisy.values())
            .all(|(a, b)| (a - b).abs() <= 1.0));
        assert!(clean.values() != noisy.values());
    }

    #[test]
    fn clutter_stays_below_strong_evidence() {
        let noise = NoiseSpec {
            additive_sigma: 0.0,
            clutter_blobs: 8,
            clutter_amplitude: 0.4,
        };
        for seed in 0..50 {
            let s = generate_scene(seed, &SceneParams::default().with_k(2)).unwrap();
            let m: SaliencyMap<f64> = render_scene(&s, &noise).unwrap();
            let mut background = m.clone();
            for roi in s.rois().unwrap() {
                for y in roi.y0..=roi.y1 {
                    for x in roi.x0..=roi.x1 {
                        background.set(x, y, 0.0);
                    }
                }
            }
            assert!(background.min_max().1 > 0.0, "seed {seed}: clutter missing");
            assert_eq!(threshold_map(&background, 0.7).unwrap().count_ones(), 0);
        }
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec {
            clutter_amplitude: 0.7,
            ..NoiseSpec::none()
        }
        .validate()
        .is_err());
        assert!(NoiseSpec {
            additive_sigma: -0.1,
            ..NoiseSpec::none()
        }
        .validate()
        .is_err());
    }
}
