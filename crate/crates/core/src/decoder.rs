// SPDX-License-Identifier: Apache-2.0

//! Saliency map + subitizing output to an exact set of boxes, without proposals or NMS.
//!
//! [`detect`] smooths the map, then dispatches on the predicted count:
//!
//! | category | confidence      | branch                                   |
//! |----------|-----------------|------------------------------------------|
//! | 0        | any             | no boxes                                 |
//! | 1        | `> theta_c`     | [`single_detect`]                        |
//! | 1        | `<= theta_c`    | [`multi_detect`], unbounded peak sweep   |
//! | 2        | `>= theta_c`    | [`multi_detect`], sweep stops at 2 peaks |
//! | 2        | `< theta_c`     | [`multi_detect`], unbounded peak sweep   |
//! | 3+       | any             | [`multi_detect`], unbounded peak sweep   |
//!
//! The multi-object path collects component maxima over a descending list of thresholds,
//! discards peaks below `theta_c`, splits the map with one axis-aligned line per peak pair
//! (the line whose maximum activation is smallest) and runs the single-object extraction
//! inside each peak's cell of the resulting grid.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{BoundingBox, Cell, CellRect};
use crate::loss::CountCategory;
use crate::raster::{
    component_argmax, connected_components, gaussian_blur, resample_smooth, roi_max, threshold_map,
    Orientation, SaliencyMap,
};
use crate::scalar::{idx, Scalar};

/// Fraction of the global maximum used when no peak reaches `theta_c`.
const FALLBACK_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubitizingOutput<T> {
    pub category: CountCategory,
    /// Probability of `category`.
    pub confidence: T,
}

impl<T: Scalar> SubitizingOutput<T> {
    pub fn new(category: CountCategory, confidence: T) -> Result<Self> {
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(invalid(format!(
                "subitizing confidence must lie in [0, 1], got {confidence}"
            )));
        }
        Ok(Self { category, confidence })
    }

    /// Ground-truth count with full confidence.
    pub fn exact(count: usize) -> Self {
        Self {
            category: CountCategory::from_count(count),
            confidence: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeResolution {
    /// Decode on the map grid; boxes are scaled by the stride afterwards.
    Native,
    /// Bilinearly resample to this size (normally the input image) before decoding.
    Upsampled { width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig<T> {
    /// Strong-evidence threshold for binarization, peak reliability and the single-object gate.
    pub theta_c: T,
    /// Peak discovery thresholds, strictly descending.
    pub peak_thresholds: Vec<T>,
    /// Smoothing applied at decode resolution.
    pub smooth_sigma: T,
    pub decode_resolution: DecodeResolution,
    /// Expand boxes to undo the shrinkage of thresholding a Gaussian at `theta_c`.
    pub box_rescale: bool,
    /// Input pixels per map cell, used for native-resolution box coordinates.
    pub stride: u32,
}

impl<T: Scalar> Default for DecoderConfig<T> {
    fn default() -> Self {
        Self::profile_224()
    }
}

impl<T: Scalar> DecoderConfig<T> {
    pub const DEFAULT_THETA_C: f64 = 0.7;
    pub const DEFAULT_PEAK_THRESHOLDS: [f64; 4] = [0.95, 0.9, 0.8, 0.6];

    fn profile(size: usize, sigma: f64) -> Self {
        Self {
            theta_c: T::of(Self::DEFAULT_THETA_C),
            peak_thresholds: Self::DEFAULT_PEAK_THRESHOLDS.iter().map(|&t| T::of(t)).collect(),
            smooth_sigma: T::of(sigma),
            decode_resolution: DecodeResolution::Upsampled {
                width: size,
                height: size,
            },
            box_rescale: false,
            stride: 16,
        }
    }

    /// 224x224 input, sigma 2 smoothing.
    pub fn profile_224() -> Self {
        Self::profile(224, 2.0)
    }

    /// 448x448 input, sigma 10 smoothing.
    pub fn profile_448() -> Self {
        Self::profile(448, 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_c > T::zero() && self.theta_c < T::one()) {
            return Err(invalid(format!(
                "theta_c must lie in (0, 1), got {}",
                self.theta_c
            )));
        }
        if self.peak_thresholds.is_empty() {
            return Err(invalid("peak thresholds must not be empty"));
        }
        if self
            .peak_thresholds
            .iter()
            .any(|&t| !(t > T::zero() && t < T::one()))
        {
            return Err(invalid("peak thresholds must lie in (0, 1)"));
        }
        if self.peak_thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(invalid("peak thresholds must be strictly descending"));
        }
        if !(self.smooth_sigma >= T::zero()) || !self.smooth_sigma.is_finite() {
            return Err(invalid(format!(
                "smooth_sigma must be non-negative, got {}",
                self.smooth_sigma
            )));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if let DecodeResolution::Upsampled { width, height } = self.decode_resolution {
            if width == 0 || height == 0 {
                return Err(invalid("decode resolution must be positive"));
            }
        }
        Ok(())
    }

    /// Expansion factor `1 / sqrt(2 ln(1/theta_c))`: a Gaussian thresholded at `theta_c`
    /// keeps `sqrt(2 ln(1/theta_c))` standard deviations per axis.
    pub fn rescale_factor(&self) -> T {
        T::one() / (T::of(2.0) * (T::one() / self.theta_c).ln()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak<T> {
    pub location: Cell,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatingLine<T> {
    pub orientation: Orientation,
    pub position: usize,
    /// Maximum activation along the line.
    pub score: T,
}

/// A detection in the cell grid of the map it was extracted from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDetection<T> {
    pub extent: CellRect,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox<T> {
    pub bbox: BoundingBox<T>,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult<T> {
    pub boxes: Vec<ScoredBox<T>>,
    pub predicted_count: usize,
}

impl<T> DetectionResult<T> {
    pub fn empty() -> Self {
        Self {
            boxes: Vec::new(),
            predicted_count: 0,
        }
    }

    fn from_boxes(boxes: Vec<ScoredBox<T>>) -> Self {
        Self {
            predicted_count: boxes.len(),
            boxes,
        }
    }
}

/// Branch [`detect`] takes for a subitizing output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Empty,
    Single,
    /// Multi-object path; `target` bounds the peak sweep, `None` sweeps every threshold.
    Multi {
        target: Option<usize>,
    },
}

pub fn dispatch<T: Scalar>(sub: &SubitizingOutput<T>, theta_c: T) -> Branch {
    match sub.category {
        CountCategory::Zero => Branch::Empty,
        CountCategory::One if sub.confidence > theta_c => Branch::Single,
        _ => Branch::Multi {
            target: sweep_target(sub, theta_c),
        },
    }
}

/// Peak count the sweep aims for; only a confident, bounded count above one sets a target.
fn sweep_target<T: Scalar>(sub: &SubitizingOutput<T>, theta_c: T) -> Option<usize> {
    let n = sub.category.min_count();
    let bounded = sub.category != CountCategory::ThreePlus;
    (bounded && n > 1 && sub.confidence >= theta_c).then_some(n)
}

/// Optional upsampling to the decode resolution followed by Gaussian smoothing.
pub fn preprocess<T: Scalar>(map: &SaliencyMap<T>, cfg: &DecoderConfig<T>) -> Result<SaliencyMap<T>> {
    cfg.validate()?;
    let mut out = match cfg.decode_resolution {
        DecodeResolution::Native => gaussian_blur(map, cfg.smooth_sigma)?,
        DecodeResolution::Upsampled { width, height } => {
            resample_smooth(map, width, height, cfg.smooth_sigma)?
        }
    };
    out.clamp_unit();
    Ok(out)
}

/// Binarize at `theta_c` and return the component extent with the highest ROI maximum.
///
/// Ties go to the larger component, then to the one found first in raster order.
pub fn single_detect<T: Scalar>(map: &SaliencyMap<T>, theta_c: T) -> Result<Option<CellDetection<T>>> {
    let mask = threshold_map(map, theta_c)?;
    let mut best: Option<(CellDetection<T>, usize)> = None;
    for comp in connected_components(&mask) {
        let (score, _) = roi_max(map, comp.extent)?;
        let better = match &best {
            None => true,
            Some((b, size)) => score > b.score || (score == b.score && comp.pixel_count > *size),
        };
        if better {
            best = Some((
                CellDetection {
                    extent: comp.extent,
                    score,
                },
                comp.pixel_count,
            ));
        }
    }
    Ok(best.map(|(d, _)| d))
}

/// Multi-level peak sweep.
///
/// Thresholds are visited in the given (descending) order; every component's maximum joins
/// the peak set, duplicates collapse, and the sweep stops after the first level at which the
/// set holds at least `target` peaks.
pub fn find_peaks<T: Scalar>(
    map: &SaliencyMap<T>,
    thresholds: &[T],
    target: Option<usize>,
) -> Result<Vec<Peak<T>>> {
    let mut seen = HashSet::new();
    let mut peaks = Vec::new();
    for &theta in thresholds {
        let mask = threshold_map(map, theta)?;
        for comp in connected_components(&mask) {
            let (value, location) = component_argmax(map, &comp);
            if seen.insert(location) {
                peaks.push(Peak { location, value });
            }
        }
        if target.is_some_and(|t| peaks.len() >= t) {
            break;
        }
    }
    Ok(peaks)
}

/// Column and row maxima, so each candidate line costs O(1).
struct LineProfile<T> {
    columns: Vec<T>,
    rows: Vec<T>,
}

impl<T: Scalar> LineProfile<T> {
    fn of(map: &SaliencyMap<T>) -> Self {
        let mut columns = vec![T::neg_infinity(); map.width()];
        let mut rows = Vec::with_capacity(map.height());
        for y in 0..map.height() {
            let row = map.row(y);
            let mut rmax = T::neg_infinity();
            for (c, &v) in columns.iter_mut().zip(row) {
                *c = c.max(v);
                rmax = rmax.max(v);
            }
            rows.push(rmax);
        }
        Self { columns, rows }
    }

    fn separate(&self, a: Cell, b: Cell) -> Result<SeparatingLine<T>> {
        let dx = a.x.abs_diff(b.x);
        let dy = a.y.abs_diff(b.y);
        let (orientation, pa, pb, scores) = if dx >= dy {
            (Orientation::Vertical, a.x, b.x, &self.columns)
        } else {
            (Orientation::Horizontal, a.y, b.y, &self.rows)
        };
        let (lo, hi) = (pa.min(pb), pa.max(pb));
        let mut best: Option<SeparatingLine<T>> = None;
        for (p, &score) in scores.iter().enumerate().take(hi).skip(lo + 1) {
            let better = match &best {
                None => true,
                Some(b) => {
                    score < b.score
                        || (score == b.score
                            && (2 * p).abs_diff(lo + hi) < (2 * b.position).abs_diff(lo + hi))
                }
            };
            if better {
                best = Some(SeparatingLine {
                    orientation,
                    position: p,
                    score,
                });
            }
        }
        best.ok_or(Error::NoSeparator {
            a: (a.x, a.y),
            b: (b.x, b.y),
        })
    }
}

/// Axis-aligned line between two peaks minimizing the maximum activation it crosses.
///
/// Vertical when the peaks are at least as far apart in `x` as in `y`. Among equal scores the
/// line nearest the midpoint wins, then the smaller index.
pub fn find_separating_line<T: Scalar>(
    map: &SaliencyMap<T>,
    a: &Peak<T>,
    b: &Peak<T>,
) -> Result<SeparatingLine<T>> {
    if a.location == b.location {
        return Err(invalid("separating line needs two distinct peaks"));
    }
    let bounds = map.bounds();
    if !bounds.contains(a.location) || !bounds.contains(b.location) {
        return Err(invalid("peak lies outside the map"));
    }
    LineProfile::of(map).separate(a.location, b.location)
}

/// Axis-aligned cells induced by full-extent lines. A line at position `p` starts a new band,
/// so every map cell belongs to exactly one region.
struct Partition {
    columns: Vec<usize>,
    rows: Vec<usize>,
    width: usize,
    height: usize,
}

impl Partition {
    fn new<T>(lines: &[SeparatingLine<T>], width: usize, height: usize) -> Self {
        let mut columns: Vec<usize> = lines
            .iter()
            .filter(|l| l.orientation == Orientation::Vertical)
            .map(|l| l.position)
            .collect();
        let mut rows: Vec<usize> = lines
            .iter()
            .filter(|l| l.orientation == Orientation::Horizontal)
            .map(|l| l.position)
            .collect();
        columns.sort_unstable();
        columns.dedup();
        rows.sort_unstable();
        rows.dedup();
        Self {
            columns,
            rows,
            width,
            height,
        }
    }

    fn band(cuts: &[usize], len: usize, v: usize) -> (usize, usize, usize) {
        let i = cuts.partition_point(|&c| c <= v);
        let start = if i == 0 { 0 } else { cuts[i - 1] };
        let end = if i == cuts.len() { len - 1 } else { cuts[i] - 1 };
        (i, start, end)
    }

    /// Region id and bounds of the cell containing `c`.
    fn region(&self, c: Cell) -> ((usize, usize), CellRect) {
        let (bx, x0, x1) = Self::band(&self.columns, self.width, c.x);
        let (by, y0, y1) = Self::band(&self.rows, self.height, c.y);
        ((bx, by), CellRect::new(x0, y0, x1, y1))
    }
}

/// Reliable peaks: sweep, then drop everything below `theta_c`.
pub fn surviving_peaks<T: Scalar>(
    map: &SaliencyMap<T>,
    sub: &SubitizingOutput<T>,
    cfg: &DecoderConfig<T>,
) -> Result<Vec<Peak<T>>> {
    let target = sweep_target(sub, cfg.theta_c);
    let mut peaks = find_peaks(map, &cfg.peak_thresholds, target)?;
    peaks.retain(|p| p.value >= cfg.theta_c);
    Ok(peaks)
}

/// Multi-object extraction on an already preprocessed map; detections are in its cell grid.
pub fn multi_detect<T: Scalar>(
    map: &SaliencyMap<T>,
    sub: &SubitizingOutput<T>,
    cfg: &DecoderConfig<T>,
) -> Result<Vec<CellDetection<T>>> {
    cfg.validate()?;
    let peaks = surviving_peaks(map, sub, cfg)?;
    if peaks.is_empty() {
        return fallback(map, sub, cfg);
    }
    let mut out = Vec::new();
    for (_, region) in assign_regions(map, peaks)? {
        let sub_map = map.crop(region)?;
        if let Some(d) = single_detect(&sub_map, cfg.theta_c)? {
            out.push(CellDetection {
                extent: d.extent.offset(region.x0, region.y0),
                score: d.score,
            });
        }
    }
    Ok(out)
}

/// Splits the map between peaks: one separating line per pair, then each peak claims the
/// grid cell containing it. Peaks are visited by descending value; a peak that cannot be
/// separated from a stronger one, or lands in an already claimed cell, is dropped.
pub fn assign_regions<T: Scalar>(
    map: &SaliencyMap<T>,
    mut peaks: Vec<Peak<T>>,
) -> Result<Vec<(Peak<T>, CellRect)>> {
    peaks.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .expect("finite map values")
            .then(a.location.raster_key().cmp(&b.location.raster_key()))
    });
    peaks.dedup_by_key(|p| p.location);

    let profile = LineProfile::of(map);
    let mut kept: Vec<Peak<T>> = Vec::with_capacity(peaks.len());
    let mut lines = Vec::new();
    for p in peaks {
        let mut candidate = Vec::with_capacity(kept.len());
        let mut separable = true;
        for k in &kept {
            match profile.separate(k.location, p.location) {
                Ok(line) => candidate.push(line),
                Err(Error::NoSeparator { .. }) => {
                    separable = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if separable {
            kept.push(p);
            lines.extend(candidate);
        }
    }

    let partition = Partition::new(&lines, map.width(), map.height());
    let mut claimed = HashSet::new();
    let mut out = Vec::with_capacity(kept.len());
    for p in kept {
        let (id, region) = partition.region(p.location);
        if claimed.insert(id) {
            out.push((p, region));
        }
    }
    Ok(out)
}
/// No reliable peak: a confident non-zero count still yields the strongest blob, found by
/// thresholding just below the global maximum.
fn fallback<T: Scalar>(
    map: &SaliencyMap<T>,
    sub: &SubitizingOutput<T>,
    cfg: &DecoderConfig<T>,
) -> Result<Vec<CellDetection<T>>> {
    let confident = sub.category != CountCategory::Zero && sub.confidence >= cfg.theta_c;
    let (max, _) = map.argmax();
    if !confident || max <= T::zero() {
        return Ok(Vec::new());
    }
    Ok(single_detect(map, max * T::of(FALLBACK_FRACTION))?
        .into_iter()
        .collect())
}

/// Full decode of a raw map: preprocess, dispatch, and report boxes in input pixels.
pub fn detect<T: Scalar>(
    map: &SaliencyMap<T>,
    sub: &SubitizingOutput<T>,
    cfg: &DecoderConfig<T>,
) -> Result<DetectionResult<T>> {
    let pre = preprocess(map, cfg)?;
    let dets = match dispatch(sub, cfg.theta_c) {
        Branch::Empty => return Ok(DetectionResult::empty()),
        Branch::Single => single_detect(&pre, cfg.theta_c)?.into_iter().collect(),
        Branch::Multi { .. } => multi_detect(&pre, sub, cfg)?,
    };
    let scale = match cfg.decode_resolution {
        DecodeResolution::Native => idx::<T>(cfg.stride as usize),
        DecodeResolution::Upsampled { .. } => T::one(),
    };
    let frame_w = idx::<T>(pre.width()) * scale;
    let frame_h = idx::<T>(pre.height()) * scale;
    let factor = cfg.rescale_factor();
    let boxes = dets
        .into_iter()
        .map(|d| {
            let mut bbox = d.extent.to_box(scale);
            if cfg.box_rescale {
                bbox = bbox.scaled_about_center(factor, frame_w, frame_h);
            }
            ScoredBox { bbox, score: d.score }
        })
        .collect();
    Ok(DetectionResult::from_boxes(boxes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode_gt, EncoderConfig};
    use proptest::prelude::*;

    fn native_cfg() -> DecoderConfig<f64> {
        DecoderConfig {
            smooth_sigma: 0.0,
            decode_resolution: DecodeResolution::Native,
            ..DecoderConfig::default()
        }
    }

    fn gaussian_map(w: usize, h: usize, blobs: &[(f64, f64, f64, f64)]) -> SaliencyMap<f64> {
        // (mu_x, mu_y, sigma, amplitude)
        SaliencyMap::from_fn(w, h, |x, y| {
            blobs
                .iter()
                .map(|&(mx, my, s, a)| {
                    let d2 = (x as f64 - mx).powi(2) + (y as f64 - my).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum::<f64>()
                .min(1.0)
        })
    }

    fn enc224() -> EncoderConfig {
        EncoderConfig::new(224, 224, 16).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = DecoderConfig::<f64>::default();
        assert_eq!(c.theta_c, 0.7);
        assert_eq!(c.peak_thresholds, vec![0.95, 0.9, 0.8, 0.6]);
        assert_eq!(c.smooth_sigma, 2.0);
        assert_eq!(
            c.decode_resolution,
            DecodeResolution::Upsampled {
                width: 224,
                height: 224
            }
        );
        assert!(!c.box_rescale);
        assert_eq!(DecoderConfig::<f64>::profile_448().smooth_sigma, 10.0);
        assert!((c.rescale_factor() - 1.0 / 0.844_600_430_900_591_4).abs() < 1e-9);

        let bad = DecoderConfig {
            peak_thresholds: vec![0.9, 0.95],
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = DecoderConfig {
            theta_c: 1.0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = DecoderConfig {
            smooth_sigma: -1.0,
            ..c
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn preprocess_examples() {
        let m = gaussian_map(14, 14, &[(7.0, 7.0, 2.0, 1.0)]);
        assert_eq!(preprocess(&m, &native_cfg()).unwrap(), m);

        let up = preprocess(&m, &DecoderConfig::default()).unwrap();
        assert_eq!((up.width(), up.height()), (224, 224));
        assert!(up.min_max().1 <= m.min_max().1 + 1e-6);

        let mut imp = SaliencyMap::<f64>::zeros(21, 21);
        imp.set(8, 12, 1.0);
        let cfg = DecoderConfig {
            smooth_sigma: 1.5,
            ..native_cfg()
        };
        assert_eq!(preprocess(&imp, &cfg).unwrap().argmax().1, Cell::new(8, 12));
    }

    #[test]
    fn single_detect_examples() {
        assert_eq!(
            single_detect(&SaliencyMap::<f64>::zeros(14, 14), 0.7).unwrap(),
            None
        );

        let b = BoundingBox::new(120.0, 120.0, 64.0, 64.0).unwrap();
        let m = encode_gt(&[b], &enc224()).unwrap();
        let d = single_detect(&m, 0.7).unwrap().unwrap();
        assert_eq!(d.extent, CellRect::new(6, 6, 8, 8));
        assert_eq!(d.score, 1.0);

        let two = gaussian_map(20, 10, &[(4.0, 5.0, 1.0, 0.8), (15.0, 5.0, 1.0, 1.0)]);
        let d = single_detect(&two, 0.7).unwrap().unwrap();
        assert!(d.extent.contains(Cell::new(15, 5)));
        assert_eq!(d.score, 1.0);
    }

    #[test]
    fn single_detect_tie_prefers_larger_component() {
        let mut m = SaliencyMap::<f64>::zeros(10, 5);
        m.set(1, 1, 0.9);
        for x in 5..8 {
            m.set(x, 2, 0.9);
        }
        let d = single_detect(&m, 0.7).unwrap().unwrap();
        assert_eq!(d.extent, CellRect::new(5, 2, 7, 2));
    }

    #[test]
    fn find_peaks_examples() {
        let th = [0.95, 0.9, 0.8, 0.6];
        assert!(find_peaks(&SaliencyMap::<f64>::zeros(8, 8), &th, None)
            .unwrap()
            .is_empty());

        let one = gaussian_map(14, 14, &[(6.0, 8.0, 2.0, 1.0)]);
        let p = find_peaks(&one, &th, None).unwrap();
        assert_eq!(
            p,
            vec![Peak {
                location: Cell::new(6, 8),
                value: 1.0
            }]
        );

        // Two equal blobs: the first level already yields both peaks.
        let two = gaussian_map(20, 9, &[(5.0, 4.0, 1.5, 1.0), (14.0, 4.0, 1.5, 1.0)]);
        let p = find_peaks(&two, &th, Some(2)).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].location, Cell::new(5, 4));
        assert_eq!(p[1].location, Cell::new(14, 4));
    }

    #[test]
    fn find_peaks_early_stop() {
        // A 0.85 blob is only found at the 0.8 level; a target of 1 stops at 0.95.
        let m = gaussian_map(20, 9, &[(5.0, 4.0, 1.5, 1.0), (14.0, 4.0, 1.5, 0.85)]);
        let th = [0.95, 0.9, 0.8, 0.6];
        assert_eq!(find_peaks(&m, &th, Some(1)).unwrap().len(), 1);
        assert_eq!(find_peaks(&m, &th, Some(2)).unwrap().len(), 2);
        assert_eq!(find_peaks(&m, &th, None).unwrap().len(), 2);
    }

    #[test]
    fn separating_line_examples() {
        let z = SaliencyMap::<f64>::zeros(14, 10);
        let pk = |x, y| Peak {
            location: Cell::new(x, y),
            value: 1.0,
        };
        let l = find_separating_line(&z, &pk(2, 5), &pk(10, 5)).unwrap();
        assert_eq!(
            (l.orientation, l.position, l.score),
            (Orientation::Vertical, 6, 0.0)
        );

        let m = gaussian_map(16, 8, &[(3.0, 4.0, 1.5, 1.0), (11.0, 4.0, 1.5, 1.0)]);
        let mut m = m;
        for y in 0..8 {
            m.set(7, y, 0.0);
        }
        let l = find_separating_line(&m, &pk(3, 4), &pk(11, 4)).unwrap();
        // Exhaustive candidate scoring oracle.
        let best = (4..11)
            .min_by(|&a, &b| {
                let sa = (0..8).map(|y| m.get(a, y)).fold(0.0, f64::max);
                let sb = (0..8).map(|y| m.get(b, y)).fold(0.0, f64::max);
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        assert_eq!(best, 7);
        assert_eq!(l.position, 7);

        let l = find_separating_line(&z, &pk(3, 1), &pk(4, 8)).unwrap();
        assert_eq!(l.orientation, Orientation::Horizontal);
        assert_eq!(l.position, 4);

        assert!(matches!(
            find_separating_line(&z, &pk(4, 4), &pk(5, 4)),
            Err(Error::NoSeparator { .. })
        ));
        assert!(find_separating_line(&z, &pk(4, 4), &pk(4, 4)).is_err());
    }

    #[test]
    fn separating_line_tie_prefers_smaller_index_at_equal_distance() {
        let z = SaliencyMap::<f64>::zeros(14, 4);
        let pk = |x| Peak {
            location: Cell::new(x, 1),
            value: 1.0,
        };
        // Midpoint 6.5: positions 6 and 7 are equally close.
        assert_eq!(find_separating_line(&z, &pk(2), &pk(11)).unwrap().position, 6);
    }

    #[test]
    fn multi_detect_two_blobs() {
        let boxes = [
            BoundingBox::new(56.0, 120.0, 64.0, 64.0).unwrap(),
            BoundingBox::new(168.0, 120.0, 64.0, 64.0).unwrap(),
        ];
        let m = encode_gt(&boxes, &enc224()).unwrap();
        let sub = SubitizingOutput::new(CountCategory::Two, 0.9).unwrap();
        let dets = multi_detect(&m, &sub, &native_cfg()).unwrap();
        assert_eq!(dets.len(), 2);
        let mut centers: Vec<(f64, f64)> = dets
            .iter()
            .map(|d| {
                (
                    (d.extent.x0 + d.extent.x1) as f64 / 2.0,
                    (d.extent.y0 + d.extent.y1) as f64 / 2.0,
                )
            })
            .collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centers[0].0 - 3.0).abs() <= 1.0 && (centers[0].1 - 7.0).abs() <= 1.0);
        assert!((centers[1].0 - 10.0).abs() <= 1.0 && (centers[1].1 - 7.0).abs() <= 1.0);
    }

    #[test]
    fn multi_detect_single_blob_with_count_two() {
        let m = encode_gt(&[BoundingBox::new(120.0, 120.0, 64.0, 64.0).unwrap()], &enc224()).unwrap();
        let sub = SubitizingOutput::new(CountCategory::Two, 0.9).unwrap();
        assert_eq!(multi_detect(&m, &sub, &native_cfg()).unwrap().len(), 1);
    }

    #[test]
    fn multi_detect_empty_map_has_no_fallback_box() {
        let sub = SubitizingOutput::new(CountCategory::ThreePlus, 0.95).unwrap();
        let z = SaliencyMap::<f64>::zeros(14, 14);
        assert!(multi_detect(&z, &sub, &native_cfg()).unwrap().is_empty());
    }

    #[test]
    fn fallback_on_weak_map() {
        let m = gaussian_map(14, 14, &[(7.0, 7.0, 2.0, 0.5)]);
        let cfg = native_cfg();
        let confident = SubitizingOutput::new(CountCategory::Two, 0.9).unwrap();
        let dets = multi_detect(&m, &confident, &cfg).unwrap();
        assert_eq!(dets.len(), 1);
        assert!(dets[0].extent.contains(Cell::new(7, 7)));
        let unsure = SubitizingOutput::new(CountCategory::Two, 0.3).unwrap();
        assert!(multi_detect(&m, &unsure, &cfg).unwrap().is_empty());
    }

    #[test]
    fn adjacent_peaks_merge_into_the_stronger() {
        let m = SaliencyMap::<f64>::zeros(12, 8);
        let pk = |x, y, v| Peak {
            location: Cell::new(x, y),
            value: v,
        };
        let regions = assign_regions(&m, vec![pk(4, 4, 0.8), pk(5, 5, 0.9), pk(9, 2, 0.75)]).unwrap();
        let kept: Vec<Cell> = regions.iter().map(|(p, _)| p.location).collect();
        assert_eq!(kept, vec![Cell::new(5, 5), Cell::new(9, 2)]);
        // Vertical line between x=5 and x=9 at the midpoint, 7.
        assert_eq!(regions[0].1, CellRect::new(0, 0, 6, 7));
        assert_eq!(regions[1].1, CellRect::new(7, 0, 11, 7));
    }

    #[test]
    fn regions_partition_the_map() {
        let m = SaliencyMap::<f64>::zeros(20, 20);
        let pk = |x, y| Peak {
            location: Cell::new(x, y),
            value: 1.0,
        };
        let regions = assign_regions(&m, vec![pk(2, 2), pk(15, 3), pk(8, 16)]).unwrap();
        assert_eq!(regions.len(), 3);
        for (i, (p, r)) in regions.iter().enumerate() {
            assert!(r.contains(p.location));
            for (_, q) in &regions[i + 1..] {
                assert!(r.intersect(q).is_none());
            }
        }
    }

    #[test]
    fn gating_table() {
        let th = 0.7;
        let above = 0.9;
        let below = 0.5;
        let case = |c, conf| dispatch(&SubitizingOutput::new(c, conf).unwrap(), th);
        assert_eq!(case(CountCategory::Zero, above), Branch::Empty);
        assert_eq!(case(CountCategory::Zero, below), Branch::Empty);
        assert_eq!(case(CountCategory::One, above), Branch::Single);
        assert_eq!(case(CountCategory::One, below), Branch::Multi { target: None });
        assert_eq!(case(CountCategory::Two, above), Branch::Multi { target: Some(2) });
        assert_eq!(case(CountCategory::Two, below), Branch::Multi { target: None });
        assert_eq!(
            case(CountCategory::ThreePlus, above),
            Branch::Multi { target: None }
        );
        assert_eq!(
            case(CountCategory::ThreePlus, below),
            Branch::Multi { target: None }
        );
        // Strict comparison on the single-object gate.
        assert_eq!(case(CountCategory::One, th), Branch::Multi { target: None });
    }

    #[test]
    fn detect_examples() {
        let cfg = DecoderConfig::<f64>::default();
        let b = BoundingBox::new(120.0, 120.0, 64.0, 64.0).unwrap();
        let m = encode_gt(&[b], &enc224()).unwrap();

        let zero = SubitizingOutput::new(CountCategory::Zero, 0.99).unwrap();
        assert_eq!(detect(&m, &zero, &cfg).unwrap(), DetectionResult::empty());

        let one = SubitizingOutput::new(CountCategory::One, 0.95).unwrap();
        let r = detect(&m, &one, &cfg).unwrap();
        assert_eq!(r.predicted_count, 1);
        let rescaled = detect(
            &m,
            &one,
            &DecoderConfig {
                box_rescale: true,
                ..cfg.clone()
            },
        )
        .unwrap();
        let got = rescaled.boxes[0].bbox;
        assert!((got.w / 2.0 - 32.0).abs() <= 0.15 * 32.0, "{got:?}");
        assert!((got.h / 2.0 - 32.0).abs() <= 0.15 * 32.0);
        assert!((got.cx - b.cx).abs() <= 1.0 && (got.cy - b.cy).abs() <= 1.0);

        let pair = [
            BoundingBox::new(56.0, 120.0, 64.0, 64.0).unwrap(),
            BoundingBox::new(168.0, 120.0, 64.0, 64.0).unwrap(),
        ];
        let m2 = encode_gt(&pair, &enc224()).unwrap();
        let unsure_one = SubitizingOutput::new(CountCategory::One, 0.5).unwrap();
        assert_eq!(detect(&m2, &unsure_one, &cfg).unwrap().predicted_count, 2);
    }

    #[test]
    fn native_boxes_scale_by_stride() {
        let b = BoundingBox::new(120.0, 120.0, 64.0, 64.0).unwrap();
        let m = encode_gt(&[b], &enc224()).unwrap();
        let one = SubitizingOutput::new(CountCategory::One, 0.95).unwrap();
        let r = detect(&m, &one, &native_cfg()).unwrap();
        assert_eq!(r.boxes[0].bbox.corners(), (96.0, 96.0, 144.0, 144.0));
    }

    fn arb_blobs() -> impl Strategy<Value = SaliencyMap<f64>> {
        proptest::collection::vec((0.0f64..24.0, 0.0f64..24.0, 0.8f64..3.0, 0.3f64..1.0), 0..5)
            .prop_map(|blobs| gaussian_map(24, 24, &blobs))
    }

    proptest! {
        #[test]
        fn category_zero_is_always_empty(m in arb_blobs(), conf in 0.0f64..=1.0) {
            let sub = SubitizingOutput::new(CountCategory::Zero, conf).unwrap();
            prop_assert_eq!(detect(&m, &sub, &native_cfg()).unwrap().predicted_count, 0);
        }

        #[test]
        fn multi_detect_invariants(m in arb_blobs(), cat in 1usize..4, conf in 0.0f64..=1.0) {
            let cfg = native_cfg();
            let sub = SubitizingOutput::new(CountCategory::from_count(cat), conf).unwrap();
            let dets = multi_detect(&m, &sub, &cfg).unwrap();
            let again = multi_detect(&m, &sub, &cfg).unwrap();
            prop_assert_eq!(&dets, &again);
            for (i, a) in dets.iter().enumerate() {
                prop_assert_eq!(roi_max(&m, a.extent).unwrap().0, a.score);
                prop_assert!(a.score >= 0.0 && a.score <= 1.0);
                for b in &dets[i + 1..] {
                    prop_assert!(a.extent.intersect(&b.extent).is_none());
                }
            }
        }

        #[test]
        fn raising_theta_never_adds_peaks(m in arb_blobs(), a in 0.05f64..0.95, b in 0.05f64..0.95) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sub = SubitizingOutput::new(CountCategory::ThreePlus, 1.0).unwrap();
            let low = surviving_peaks(&m, &sub, &DecoderConfig { theta_c: lo, ..native_cfg() }).unwrap();
            let high = surviving_peaks(&m, &sub, &DecoderConfig { theta_c: hi, ..native_cfg() }).unwrap();
            prop_assert!(high.len() <= low.len());
        }
    }
}
