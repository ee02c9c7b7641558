// SPDX-License-Identifier: Apache-2.0

//! Measurement protocols: IoU-matched detection precision/recall, IoU sweeps, size strata,
//! subitizing accuracy and pixel-level PR curves.
//!
//! Counts are pooled across images before any ratio is taken. Empty denominators follow
//! fixed conventions: precision is 1 with no detections, recall is 1 with no ground truth,
//! F1 is 0 when precision and recall are both 0.

use serde::{Deserialize, Serialize};

use crate::decoder::ScoredBox;
use crate::error::{invalid, Result};
use crate::geom::BoundingBox;
use crate::loss::CountCategory;
use crate::raster::{BinaryMask, SaliencyMap};
use crate::scalar::Scalar;

pub fn iou<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    a.iou(b)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult<T> {
    /// `(detection index, ground-truth index, iou)`.
    pub pairs: Vec<(usize, usize, T)>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    if !(tau > T::zero() && tau <= T::one()) {
        return Err(invalid(format!("IoU threshold must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

/// Greedy one-to-one matching: detections in descending score order each take the free
/// ground truth with the highest IoU at or above `tau`. Ties go to the lower index.
pub fn match_detections<T: Scalar>(
    dets: &[ScoredBox<T>],
    gts: &[BoundingBox<T>],
    tau: T,
) -> Result<MatchResult<T>> {
    check_tau(tau)?;
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut taken = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for d in order {
        let mut best: Option<(usize, T)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = dets[d].bbox.iou(gt);
            if v >= tau && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) => {
                taken[g] = true;
                result.pairs.push((d, g, v));
            }
            None => result.unmatched_dets.push(d),
        }
    }
    result.unmatched_dets.sort_unstable();
    result.unmatched_gts = (0..gts.len()).filter(|&g| !taken[g]).collect();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl PRPoint {
    pub fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            true_pos,
            false_pos,
            false_neg,
        }
    }
}

/// Detections and ground truth for one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageRecord<T> {
    pub dets: Vec<ScoredBox<T>>,
    pub gts: Vec<BoundingBox<T>>,
}

pub fn detection_pr<T: Scalar>(images: &[ImageRecord<T>], tau: T) -> Result<PRPoint> {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for img in images {
        let m = match_detections(&img.dets, &img.gts, tau)?;
        tp += m.pairs.len() as u64;
        fp += m.unmatched_dets.len() as u64;
        fn_ += m.unmatched_gts.len() as u64;
    }
    Ok(PRPoint::from_counts(tp, fp, fn_))
}

pub fn iou_sweep<T: Scalar>(images: &[ImageRecord<T>], taus: &[T]) -> Result<Vec<PRPoint>> {
    taus.iter().map(|&t| detection_pr(images, t)).collect()
}

/// Area bands in square pixels. Both bounds are exclusive: small means `area < small_max_area`,
/// large means `area > large_min_area`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeStrata {
    pub small_max_area: f64,
    pub large_min_area: f64,
}

impl Default for SizeStrata {
    fn default() -> Self {
        Self {
            small_max_area: 75.0 * 75.0,
            large_min_area: 200.0 * 200.0,
        }
    }
}

impl SizeStrata {
    pub fn new(small_max_area: f64, large_min_area: f64) -> Result<Self> {
        if !(small_max_area > 0.0 && small_max_area < large_min_area) {
            return Err(invalid(format!(
                "strata need 0 < small ({small_max_area}) < large ({large_min_area})"
            )));
        }
        Ok(Self {
            small_max_area,
            large_min_area,
        })
    }

    /// Profile with a 125x125 small band.
    pub fn msra() -> Self {
        Self {
            small_max_area: 125.0 * 125.0,
            ..Self::default()
        }
    }

    pub fn is_small<T: Scalar>(&self, b: &BoundingBox<T>) -> bool {
        b.area().to_f64_lossy() < self.small_max_area
    }

    pub fn is_large<T: Scalar>(&self, b: &BoundingBox<T>) -> bool {
        b.area().to_f64_lossy() > self.large_min_area
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifiedPR {
    pub all: PRPoint,
    pub small: PRPoint,
    pub large: PRPoint,
}

/// Size-banded metrics from one global matching.
///
/// A band counts the matches and misses of its own ground truth. Detections matched to
/// ground truth outside the band are left out of it; unmatched detections are false
/// positives in every band.
pub fn stratified_pr<T: Scalar>(
    images: &[ImageRecord<T>],
    strata: &SizeStrata,
    tau: T,
) -> Result<StratifiedPR> {
    #[derive(Default)]
    struct Tally {
        tp: u64,
        fn_: u64,
    }
    let (mut all, mut small, mut large) = (Tally::default(), Tally::default(), Tally::default());
    let mut fp = 0u64;
    for img in images {
        let m = match_detections(&img.dets, &img.gts, tau)?;
        fp += m.unmatched_dets.len() as u64;
        for &(_, g, _) in &m.pairs {
            all.tp += 1;
            if strata.is_small(&img.gts[g]) {
                small.tp += 1;
            }
            if strata.is_large(&img.gts[g]) {
                large.tp += 1;
            }
        }
        for &g in &m.unmatched_gts {
            all.fn_ += 1;
            if strata.is_small(&img.gts[g]) {
                small.fn_ += 1;
            }
            if strata.is_large(&img.gts[g]) {
                large.fn_ += 1;
            }
        }
    }
    Ok(StratifiedPR {
        all: PRPoint::from_counts(all.tp, fp, all.fn_),
        small: PRPoint::from_counts(small.tp, fp, small.fn_),
        large: PRPoint::from_counts(large.tp, fp, large.fn_),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubitizingMetrics {
    pub accuracy: f64,
    /// `confusion[ground truth][prediction]`.
    pub confusion: [[u64; 4]; 4],
}

pub fn subitizing_metrics(preds: &[CountCategory], gts: &[CountCategory]) -> Result<SubitizingMetrics> {
    if preds.len() != gts.len() {
        return Err(invalid(format!(
            "{} predictions for {} ground-truth counts",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(invalid("subitizing metrics need at least one sample"));
    }
    let mut confusion = [[0u64; 4]; 4];
    for (p, g) in preds.iter().zip(gts) {
        confusion[g.index()][p.index()] += 1;
    }
    let correct: u64 = (0..4).map(|i| confusion[i][i]).sum();
    Ok(SubitizingMetrics {
        accuracy: correct as f64 / preds.len() as f64,
        confusion,
    })
}

/// Pooled pixel precision/recall of `map >= threshold` against ground-truth masks.
pub fn pixel_pr_curve<T: Scalar>(
    maps: &[SaliencyMap<T>],
    masks: &[BinaryMask],
    thresholds: &[T],
) -> Result<Vec<PRPoint>> {
    if maps.len() != masks.len() {
        return Err(invalid(format!(
            "{} maps for {} ground-truth masks",
            maps.len(),
            masks.len()
        )));
    }
    for (i, (m, g)) in maps.iter().zip(masks).enumerate() {
        if m.width() != g.width() || m.height() != g.height() {
            return Err(invalid(format!(
                "pair {i}: map {}x{} vs mask {}x{}",
                m.width(),
                m.height(),
                g.width(),
                g.height()
            )));
        }
    }
    if let Some(t) = thresholds.iter().find(|&&t| !(t >= T::zero() && t <= T::one())) {
        return Err(invalid(format!("pixel threshold must lie in [0, 1], got {t}")));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (m, g) in maps.iter().zip(masks) {
                for (&v, &truth) in m.values().iter().zip(g.bits()) {
                    match (v >= t, truth) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            PRPoint::from_counts(tp, fp, fn_)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox<f64> {
        BoundingBox::from_corners(x0, y0, x1, y1).unwrap()
    }

    fn det(b: BoundingBox<f64>, score: f64) -> ScoredBox<f64> {
        ScoredBox { bbox: b, score }
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert_eq!(iou(&a, &bx(10.0, 0.0, 20.0, 10.0)), 0.0);
        assert!((iou(&a, &bx(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn match_examples() {
        let gts = vec![bx(0.0, 0.0, 10.0, 10.0), bx(20.0, 0.0, 30.0, 10.0)];
        let dets: Vec<_> = gts.iter().map(|&g| det(g, 0.9)).collect();
        let m = match_detections(&dets, &gts, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 2);
        assert!(m.unmatched_dets.is_empty() && m.unmatched_gts.is_empty());

        // One detection overlapping two ground truths: the higher IoU wins.
        let gts = vec![bx(0.0, 0.0, 10.0, 10.0), bx(1.0, 0.0, 11.0, 10.0)];
        let m = match_detections(&[det(bx(0.5, 0.0, 10.0, 10.0), 0.8)], &gts, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].1, 0);
        assert_eq!(m.unmatched_gts, vec![1]);

        // Two detections on one ground truth: the higher score matches.
        let gts = vec![bx(0.0, 0.0, 10.0, 10.0)];
        let dets = vec![
            det(bx(0.0, 0.0, 10.0, 10.0), 0.3),
            det(bx(1.0, 1.0, 10.0, 10.0), 0.9),
        ];
        let m = match_detections(&dets, &gts, 0.5).unwrap();
        assert_eq!(m.pairs[0].0, 1);
        assert_eq!(m.unmatched_dets, vec![0]);

        assert!(match_detections(&dets, &gts, 0.0).is_err());
        assert!(match_detections(&dets, &gts, 1.5).is_err());
    }

    #[test]
    fn tau_one_matches_only_identical_boxes() {
        let gts = vec![bx(0.0, 0.0, 10.0, 10.0)];
        let m = match_detections(&[det(bx(0.0, 0.0, 10.0, 10.000001), 1.0)], &gts, 1.0).unwrap();
        assert!(m.pairs.is_empty());
        let m = match_detections(&[det(gts[0], 1.0)], &gts, 1.0).unwrap();
        assert_eq!(m.pairs.len(), 1);
    }

    #[test]
    fn pr_examples() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let perfect = vec![
            ImageRecord {
                dets: vec![det(g, 1.0)],
                gts: vec![g]
            };
            3
        ];
        let p = detection_pr(&perfect, 0.5).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));

        let empty_gt = vec![ImageRecord {
            dets: vec![det(g, 0.5)],
            gts: vec![],
        }];
        let p = detection_pr(&empty_gt, 0.5).unwrap();
        assert_eq!((p.true_pos, p.false_pos, p.false_neg), (0, 1, 0));
        assert_eq!(p.recall, 1.0);
        assert_eq!(p.precision, 0.0);

        let p = PRPoint::from_counts(7, 2, 3);
        assert!((p.precision - 7.0 / 9.0).abs() < 1e-15);
        assert!((p.recall - 0.7).abs() < 1e-15);
        assert!((p.f1 - 0.736_842_105_263_157_9).abs() < 1e-12);
        assert_eq!(PRPoint::from_counts(0, 0, 0).precision, 1.0);
        assert_eq!(PRPoint::from_counts(0, 3, 4).f1, 0.0);
    }

    #[test]
    fn sweep_examples() {
        let g = bx(0.0, 0.0, 100.0, 100.0);
        let imgs = vec![ImageRecord {
            dets: vec![det(bx(0.0, 0.0, 100.0, 80.0), 0.9)],
            gts: vec![g],
        }];
        let single = iou_sweep(&imgs, &[0.5]).unwrap();
        assert_eq!(single, vec![detection_pr(&imgs, 0.5).unwrap()]);
        let sweep = iou_sweep(&imgs, &[0.5, 0.8, 0.9]).unwrap();
        assert_eq!(sweep[0].true_pos, 1);
        assert_eq!(sweep[1].true_pos, 1);
        assert_eq!(sweep[2].true_pos, 0);

        let perfect = vec![ImageRecord {
            dets: vec![det(g, 1.0)],
            gts: vec![g],
        }];
        for p in iou_sweep(&perfect, &[0.1, 0.5, 0.9, 1.0]).unwrap() {
            assert_eq!((p.precision, p.recall), (1.0, 1.0));
        }
    }

    #[test]
    fn strata_examples() {
        let s = SizeStrata::default();
        let big = bx(0.0, 0.0, 250.0, 250.0);
        let imgs = vec![ImageRecord {
            dets: vec![det(big, 1.0)],
            gts: vec![big],
        }];
        let r = stratified_pr(&imgs, &s, 0.5).unwrap();
        assert_eq!(r.large, r.all);
        assert_eq!(r.small.recall, 1.0);
        assert_eq!(r.small.true_pos + r.small.false_neg, 0);

        let small = bx(0.0, 0.0, 50.0, 50.0);
        let large = bx(300.0, 300.0, 520.0, 520.0);
        let imgs = vec![ImageRecord {
            dets: vec![det(small, 0.9)],
            gts: vec![small, large],
        }];
        let r = stratified_pr(&imgs, &s, 0.5).unwrap();
        assert_eq!(r.small.recall, 1.0);
        assert_eq!(r.large.recall, 0.0);

        assert!(!s.is_small(&bx(0.0, 0.0, 75.0, 75.0)));
        assert!(s.is_small(&bx(0.0, 0.0, 74.9, 75.0)));
        assert!(!s.is_large(&bx(0.0, 0.0, 200.0, 200.0)));
        assert!(s.is_large(&bx(0.0, 0.0, 200.0, 200.1)));
        assert!(SizeStrata::new(100.0, 50.0).is_err());
        assert_eq!(SizeStrata::msra().small_max_area, 15625.0);
    }

    #[test]
    fn matches_to_out_of_band_gt_are_excluded() {
        let s = SizeStrata::default();
        let small = bx(0.0, 0.0, 50.0, 50.0);
        let large = bx(300.0, 300.0, 520.0, 520.0);
        let imgs = vec![ImageRecord {
            dets: vec![det(small, 0.9), det(large, 0.8)],
            gts: vec![small, large],
        }];
        let r = stratified_pr(&imgs, &s, 0.5).unwrap();
        assert_eq!((r.small.true_pos, r.small.false_pos), (1, 0));
        assert_eq!((r.large.true_pos, r.large.false_pos), (1, 0));
        assert_eq!(r.all.true_pos, 2);
    }

    #[test]
    fn subitizing_examples() {
        use CountCategory::*;
        let gts = [Zero, One, Two, ThreePlus];
        let m = subitizing_metrics(&gts, &gts).unwrap();
        assert_eq!(m.accuracy, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.confusion[i][j], u64::from(i == j));
            }
        }
        let shifted = [One, Two, ThreePlus, Zero];
        assert_eq!(subitizing_metrics(&shifted, &gts).unwrap().accuracy, 0.0);
        let m = subitizing_metrics(&[Zero, One, Two, Two], &gts).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.confusion[3][2], 1);
        assert!(subitizing_metrics(&[Zero], &gts).is_err());
    }

    #[test]
    fn pixel_pr_examples() {
        let mask = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        let map = SaliencyMap::new(2, 2, vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        let c = pixel_pr_curve(
            std::slice::from_ref(&map),
            std::slice::from_ref(&mask),
            &[0.5, 0.0],
        )
        .unwrap();
        assert_eq!((c[0].precision, c[0].recall), (1.0, 1.0));
        assert_eq!(c[1].recall, 1.0);
        assert_eq!(c[1].false_pos, 2);

        let wrong = BinaryMask::empty(3, 2);
        assert!(pixel_pr_curve(std::slice::from_ref(&map), &[wrong], &[0.5]).is_err());
        assert!(pixel_pr_curve(&[map], &[mask], &[1.5]).is_err());
    }
}
