// SPDX-License-Identifier: Apache-2.0

//! CSV reports. Every real is written with six decimals, so parsing a report yields the
//! in-memory values rounded to that precision.

use rsd_core::eval::{PRPoint, StratifiedPR, SubitizingMetrics};
use rsd_core::CountCategory;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn fixed6(v: f64) -> String {
    format!("{v:.6}")
}

/// The value a report cell holds after being written.
pub fn round6(v: f64) -> f64 {
    fixed6(v).parse().expect("fixed-point output parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub metric: String,
    pub stratum: String,
    pub tau: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPrRow {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub metric: String,
    pub value: f64,
}

pub const DETECTION_HEADER: [&str; 4] = ["metric", "stratum", "tau", "value"];
pub const MAP_PR_HEADER: [&str; 3] = ["threshold", "precision", "recall"];
pub const COUNT_HEADER: [&str; 2] = ["metric", "value"];

fn point_rows(rows: &mut Vec<DetectionRow>, stratum: &str, tau: f64, p: &PRPoint) {
    let metrics = [
        ("precision", p.precision),
        ("recall", p.recall),
        ("f1", p.f1),
        ("tp", p.true_pos as f64),
        ("fp", p.false_pos as f64),
        ("fn", p.false_neg as f64),
    ];
    for (metric, value) in metrics {
        rows.push(DetectionRow {
            metric: metric.into(),
            stratum: stratum.into(),
            tau,
            value,
        });
    }
}

/// One group of rows per threshold, strata in the order all, small, large.
pub fn detection_rows(sweep: &[(f64, StratifiedPR)]) -> Vec<DetectionRow> {
    let mut rows = Vec::new();
    for (tau, s) in sweep {
        point_rows(&mut rows, "all", *tau, &s.all);
        point_rows(&mut rows, "small", *tau, &s.small);
        point_rows(&mut rows, "large", *tau, &s.large);
    }
    rows
}

pub fn map_pr_rows(thresholds: &[f64], curve: &[PRPoint]) -> Vec<MapPrRow> {
    thresholds
        .iter()
        .zip(curve)
        .map(|(&threshold, p)| MapPrRow {
            threshold,
            precision: p.precision,
            recall: p.recall,
        })
        .collect()
}

pub fn count_rows(m: &SubitizingMetrics) -> Vec<CountRow> {
    let mut rows = vec![CountRow {
        metric: "accuracy".into(),
        value: m.accuracy,
    }];
    for g in CountCategory::ALL {
        for p in CountCategory::ALL {
            rows.push(CountRow {
                metric: format!("confusion_{}_{}", g.label(), p.label()),
                value: m.confusion[g.index()][p.index()] as f64,
            });
        }
    }
    rows
}

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn emit_detection_csv(rows: &[DetectionRow]) -> String {
    write_csv(
        &DETECTION_HEADER,
        rows.iter().map(|r| {
            vec![
                r.metric.clone(),
                r.stratum.clone(),
                fixed6(r.tau),
                fixed6(r.value),
            ]
        }),
    )
}

pub fn emit_map_pr_csv(rows: &[MapPrRow]) -> String {
    write_csv(
        &MAP_PR_HEADER,
        rows.iter()
            .map(|r| vec![fixed6(r.threshold), fixed6(r.precision), fixed6(r.recall)]),
    )
}

pub fn emit_count_csv(rows: &[CountRow]) -> String {
    write_csv(
        &COUNT_HEADER,
        rows.iter().map(|r| vec![r.metric.clone(), fixed6(r.value)]),
    )
}

fn parse_csv<R: serde::de::DeserializeOwned>(text: &str, header: &[&str], source: &str) -> CliResult<Vec<R>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| CliError::parse(source, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::parse(
            source,
            format!("expected header {:?}, found {:?}", header.join(","), found),
        ));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::parse(source, e)))
        .collect()
}

pub fn parse_detection_csv(text: &str, source: &str) -> CliResult<Vec<DetectionRow>> {
    parse_csv(text, &DETECTION_HEADER, source)
}

pub fn parse_map_pr_csv(text: &str, source: &str) -> CliResult<Vec<MapPrRow>> {
    parse_csv(text, &MAP_PR_HEADER, source)
}

pub fn parse_count_csv(text: &str, source: &str) -> CliResult<Vec<CountRow>> {
    parse_csv(text, &COUNT_HEADER, source)
}
