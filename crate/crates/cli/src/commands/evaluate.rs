// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::Write;

use rsd_core::eval::{
    pixel_pr_curve, stratified_pr, subitizing_metrics, ImageRecord, SizeStrata, SubitizingMetrics,
};
use rsd_core::{BinaryMask, CountCategory, Map64};

use super::decode::MAP_INPUTS;
use super::write_report;
use crate::args::{CountSource, EvalCountArgs, EvalDetArgs, EvalMapArgs};
use crate::error::{validation, CliResult};
use crate::formats::{parse_map_bytes, AnnotationRecord, DetectionRecord};
use crate::io::{collect_files, image_id, read_bytes, read_records};
use crate::report::{
    count_rows, detection_rows, emit_count_csv, emit_detection_csv, emit_map_pr_csv, map_pr_rows, CountRow,
    DetectionRow, MapPrRow,
};

/// Foreground cutoff for ground-truth masks.
pub const MASK_THRESHOLD: f64 = 0.5;

/// Pairs predictions with ground truth by id, in id order. Ids present on only one side
/// or repeated on either side are reported together.
pub fn join_by_id<P, G>(preds: Vec<(String, P)>, gts: Vec<(String, G)>) -> CliResult<Vec<(String, P, G)>> {
    let mut problems = Vec::new();
    let mut gt_map = BTreeMap::new();
    for (id, g) in gts {
        if gt_map.insert(id.clone(), g).is_some() {
            problems.push(format!("duplicate ground truth {id}"));
        }
    }
    let mut pred_map = BTreeMap::new();
    for (id, p) in preds {
        if pred_map.insert(id.clone(), p).is_some() {
            problems.push(format!("duplicate prediction {id}"));
        }
    }
    for id in pred_map.keys().filter(|id| !gt_map.contains_key(*id)) {
        problems.push(format!("prediction {id} has no ground truth"));
    }
    for id in gt_map.keys().filter(|id| !pred_map.contains_key(*id)) {
        problems.push(format!("ground truth {id} has no prediction"));
    }
    if !problems.is_empty() {
        return Err(validation(format!(
            "unmatched image ids: {}",
            problems.join("; ")
        )));
    }
    Ok(pred_map
        .into_iter()
        .map(|(id, p)| {
            let g = gt_map.remove(&id).expect("joined above");
            (id, p, g)
        })
        .collect())
}

fn check_records(preds: &[DetectionRecord], gts: &[AnnotationRecord]) -> CliResult<()> {
    preds.iter().try_for_each(DetectionRecord::validate)?;
    gts.iter().try_for_each(AnnotationRecord::validate)
}

pub fn detection_report(
    preds: &[DetectionRecord],
    gts: &[AnnotationRecord],
    taus: &[f64],
    strata: &SizeStrata,
) -> CliResult<Vec<DetectionRow>> {
    check_records(preds, gts)?;
    if taus.is_empty() {
        return Err(validation("at least one IoU threshold is required"));
    }
    let joined = join_by_id(
        preds.iter().map(|p| (p.image.clone(), p)).collect(),
        gts.iter().map(|g| (g.image.clone(), g)).collect(),
    )?;
    let mut images = Vec::with_capacity(joined.len());
    for (id, p, g) in joined {
        match g.gt_boxes()? {
            Some(gts) => images.push(ImageRecord {
                dets: p.scored_boxes()?,
                gts,
            }),
            None => log::warn!("{id}: count-only ground truth, left out of box evaluation"),
        }
    }
    let sweep = taus
        .iter()
        .map(|&t| Ok((t, stratified_pr(&images, strata, t)?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(detection_rows(&sweep))
}

pub fn run_det(args: &EvalDetArgs, out: &mut dyn Write) -> CliResult<()> {
    let preds: Vec<DetectionRecord> = read_records(&args.pred)?;
    let gts: Vec<AnnotationRecord> = read_records(&args.gt)?;
    let rows = detection_report(&preds, &gts, &args.taus, &args.strata)?;
    write_report(&emit_detection_csv(&rows), args.out.as_deref(), out)
}

pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

pub fn mask_of(map: &Map64) -> BinaryMask {
    BinaryMask::new(
        map.width(),
        map.height(),
        map.values().iter().map(|&v| v >= MASK_THRESHOLD).collect(),
    )
    .expect("dimensions come from a valid map")
}

pub fn map_report(pairs: &[(Map64, BinaryMask)], thresholds: &[f64]) -> CliResult<Vec<MapPrRow>> {
    let (maps, masks): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
    let curve = pixel_pr_curve(&maps, &masks, thresholds)?;
    Ok(map_pr_rows(thresholds, &curve))
}

pub fn run_map(args: &EvalMapArgs, out: &mut dyn Write) -> CliResult<()> {
    let load = |paths| -> CliResult<Vec<(String, Map64)>> {
        collect_files(paths, &MAP_INPUTS)?
            .iter()
            .map(|p| {
                Ok((
                    image_id(p)?,
                    parse_map_bytes(&read_bytes(p)?, &p.display().to_string())?,
                ))
            })
            .collect()
    };
    let joined = join_by_id(load(&args.pred)?, load(&args.gt)?)?;
    let pairs: Vec<(Map64, BinaryMask)> = joined.into_iter().map(|(_, p, g)| (p, mask_of(&g))).collect();
    let thresholds = if args.thresholds.is_empty() {
        default_thresholds()
    } else {
        args.thresholds.clone()
    };
    let rows = map_report(&pairs, &thresholds)?;
    write_report(&emit_map_pr_csv(&rows), args.out.as_deref(), out)
}

pub fn count_metrics(
    preds: &[DetectionRecord],
    gts: &[AnnotationRecord],
    source: CountSource,
) -> CliResult<SubitizingMetrics> {
    check_records(preds, gts)?;
    let joined = join_by_id(
        preds.iter().map(|p| (p.image.clone(), p)).collect(),
        gts.iter().map(|g| (g.image.clone(), g)).collect(),
    )?;
    let (pred_cats, gt_cats): (Vec<CountCategory>, Vec<CountCategory>) = joined
        .into_iter()
        .map(|(_, p, g)| {
            let pred = match source {
                CountSource::Decoded => CountCategory::from_count(p.count_pred),
                CountSource::Subitizing => p.subitizing.category,
            };
            (pred, g.category())
        })
        .unzip();
    Ok(subitizing_metrics(&pred_cats, &gt_cats)?)
}

pub fn count_report(
    preds: &[DetectionRecord],
    gts: &[AnnotationRecord],
    source: CountSource,
) -> CliResult<Vec<CountRow>> {
    Ok(count_rows(&count_metrics(preds, gts, source)?))
}

pub fn run_count(args: &EvalCountArgs, out: &mut dyn Write) -> CliResult<()> {
    let preds: Vec<DetectionRecord> = read_records(&args.pred)?;
    let gts: Vec<AnnotationRecord> = read_records(&args.gt)?;
    let rows = count_report(&preds, &gts, args.source)?;
    write_report(&emit_count_csv(&rows), args.out.as_deref(), out)
}
