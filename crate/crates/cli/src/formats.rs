// SPDX-License-Identifier: Apache-2.0

//! On-disk formats: the `RSDMAP 1` text map, 8-bit/16-bit PGM input, and the annotation and
//! detection JSON records.
//!
//! PGM samples are divided by the file's maxval, so an 8-bit map carries steps of 1/255.

use std::fmt::Write as _;

use rsd_core::decoder::{DetectionResult, ScoredBox, SubitizingOutput};
use rsd_core::synth::SceneSpec;
use rsd_core::{Box64, CountCategory, SaliencyMap, Scalar};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{validation, CliError, CliResult};

pub const MAP_MAGIC: &str = "RSDMAP 1";
pub const MAP_EXTENSION: &str = "rsdmap";

/// Text map with ten significant digits per value.
pub fn emit_map<T: Scalar>(map: &SaliencyMap<T>) -> String {
    let mut out = format!("{MAP_MAGIC}\n{} {}\n", map.width(), map.height());
    for y in 0..map.height() {
        for (x, v) in map.row(y).iter().enumerate() {
            if x > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.9e}", v.to_f64_lossy());
        }
        out.push('\n');
    }
    out
}

pub fn parse_map<T: Scalar>(text: &str, source: &str) -> CliResult<SaliencyMap<T>> {
    let err = |line: usize, msg: String| CliError::parse(source, format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    match lines.next() {
        Some((_, l)) if l == MAP_MAGIC => {}
        Some((n, l)) => return Err(err(n, format!("expected {MAP_MAGIC:?}, found {l:?}"))),
        None => return Err(err(1, "empty file".into())),
    }
    let (n, dims) = lines.next().ok_or_else(|| err(2, "missing dimensions".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(n, format!("bad dimension {t:?}"))))
        .collect::<CliResult<_>>()?;
    let [width, height] = dims[..] else {
        return Err(err(n, "expected \"<width> <height>\"".into()));
    };
    if width == 0 || height == 0 {
        return Err(err(
            n,
            format!("dimensions must be positive, got {width}x{height}"),
        ));
    }
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(3 + row, format!("expected {height} rows, found {row}")))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| err(n, format!("bad value {tok:?}")))?;
            if !v.is_finite() {
                return Err(err(n, format!("non-finite value {tok:?}")));
            }
            values.push(T::of(v));
        }
        if values.len() - before != width {
            return Err(err(
                n,
                format!("expected {width} values, found {}", values.len() - before),
            ));
        }
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(n, "trailing data after last row".into()));
    }
    SaliencyMap::new(width, height, values).map_err(|e| CliError::parse(source, e))
}

/// Binary PGM (`P5`), samples scaled to `[0, 1]` by maxval.
pub fn parse_pgm<T: Scalar>(bytes: &[u8], source: &str) -> CliResult<SaliencyMap<T>> {
    let err = |msg: &str| CliError::parse(source, msg);
    let mut pos = 0;
    let mut token = || -> CliResult<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(err("not a binary PGM (P5)"));
    }
    let mut num =
        |what: &str| -> CliResult<usize> { token()?.parse().map_err(|_| err(&format!("bad {what}"))) };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if width == 0 || height == 0 || !(1..=65535).contains(&maxval) {
        return Err(err("header out of range"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = bytes.get(pos + 1..).ok_or_else(|| err("missing raster"))?;
    let depth = if maxval < 256 { 1 } else { 2 };
    if data.len() < width * height * depth {
        return Err(err(&format!(
            "raster holds {} bytes, need {}",
            data.len(),
            width * height * depth
        )));
    }
    let scale = 1.0 / maxval as f64;
    let values = (0..width * height)
        .map(|i| {
            let raw = if depth == 1 {
                u32::from(data[i])
            } else {
                u32::from(data[2 * i]) << 8 | u32::from(data[2 * i + 1])
            };
            T::of((f64::from(raw) * scale).min(1.0))
        })
        .collect();
    SaliencyMap::new(width, height, values).map_err(|e| CliError::parse(source, e))
}

/// 8-bit PGM with values clamped to `[0, 1]` and rounded to the nearest of 256 levels.
pub fn emit_pgm<T: Scalar>(map: &SaliencyMap<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(
        map.values()
            .iter()
            .map(|v| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Either map format, chosen by content.
pub fn parse_map_bytes<T: Scalar>(bytes: &[u8], source: &str) -> CliResult<SaliencyMap<T>> {
    if bytes.starts_with(b"P5") {
        parse_pgm(bytes, source)
    } else {
        let text =
            std::str::from_utf8(bytes).map_err(|_| CliError::parse(source, "map is not UTF-8 text"))?;
        parse_map(text, source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    pub count: usize,
    /// Absent for count-only records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<CenterBox>>,
}

impl AnnotationRecord {
    pub fn from_scene(image: impl Into<String>, scene: &SceneSpec) -> Self {
        Self {
            image: image.into(),
            width: scene.width,
            height: scene.height,
            stride: scene.stride,
            count: scene.boxes.len(),
            boxes: Some(
                scene
                    .boxes
                    .iter()
                    .map(|b| CenterBox {
                        cx: b.cx,
                        cy: b.cy,
                        w: b.w,
                        h: b.h,
                    })
                    .collect(),
            ),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        check_image_id(&self.image)?;
        if let Some(boxes) = &self.boxes {
            if boxes.len() != self.count {
                return Err(validation(format!(
                    "{}: count {} but {} boxes",
                    self.image,
                    self.count,
                    boxes.len()
                )));
            }
        }
        Ok(())
    }

    /// Ground-truth boxes, or `None` for a count-only record.
    pub fn gt_boxes(&self) -> CliResult<Option<Vec<Box64>>> {
        let Some(boxes) = &self.boxes else { return Ok(None) };
        boxes
            .iter()
            .map(|b| Box64::new(b.cx, b.cy, b.w, b.h).map_err(|e| validation(format!("{}: {e}", self.image))))
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    pub fn category(&self) -> CountCategory {
        CountCategory::from_count(self.count)
    }
}

/// Box in corner form: top-left `(x, y)` plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl CornerBox {
    pub fn from_scored(b: &ScoredBox<f64>) -> Self {
        Self {
            x: b.bbox.x0(),
            y: b.bbox.y0(),
            w: b.bbox.w,
            h: b.bbox.h,
            score: b.score,
        }
    }

    pub fn to_scored(&self) -> CliResult<ScoredBox<f64>> {
        let bbox = Box64::new(self.x + self.w / 2.0, self.y + self.h / 2.0, self.w, self.h)
            .map_err(|e| validation(e.to_string()))?;
        Ok(ScoredBox {
            bbox,
            score: self.score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubitizingRecord {
    pub category: CountCategory,
    pub confidence: f64,
}

impl From<SubitizingOutput<f64>> for SubitizingRecord {
    fn from(s: SubitizingOutput<f64>) -> Self {
        Self {
            category: s.category,
            confidence: s.confidence,
        }
    }
}

impl SubitizingRecord {
    pub fn to_output(self) -> CliResult<SubitizingOutput<f64>> {
        Ok(SubitizingOutput::new(self.category, self.confidence)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image: String,
    pub boxes: Vec<CornerBox>,
    pub count_pred: usize,
    pub subitizing: SubitizingRecord,
}

impl DetectionRecord {
    pub fn from_result(
        image: impl Into<String>,
        result: &DetectionResult<f64>,
        sub: SubitizingOutput<f64>,
    ) -> Self {
        Self {
            image: image.into(),
            boxes: result.boxes.iter().map(CornerBox::from_scored).collect(),
            count_pred: result.predicted_count,
            subitizing: sub.into(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        check_image_id(&self.image)?;
        if self.count_pred != self.boxes.len() {
            return Err(validation(format!(
                "{}: count_pred {} but {} boxes",
                self.image,
                self.count_pred,
                self.boxes.len()
            )));
        }
        if let Some(b) = self.boxes.iter().find(|b| !(0.0..=1.0).contains(&b.score)) {
            return Err(validation(format!(
                "{}: score {} outside [0, 1]",
                self.image, b.score
            )));
        }
        Ok(())
    }

    pub fn scored_boxes(&self) -> CliResult<Vec<ScoredBox<f64>>> {
        self.boxes.iter().map(CornerBox::to_scored).collect()
    }
}

/// Image ids become file names, so they must be a single plain path component.
pub fn check_image_id(id: &str) -> CliResult<()> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']) {
        return Err(validation(format!("image id {id:?} is not a plain file name")));
    }
    Ok(())
}

/// Parses a JSON document holding one record or an array of records.
pub fn parse_records<R: DeserializeOwned>(text: &str, source: &str) -> CliResult<Vec<R>> {
    let parsed = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<R>>(text)
    } else {
        serde_json::from_str::<R>(text).map(|r| vec![r])
    };
    parsed.map_err(|e| CliError::parse(source, e))
}

pub fn emit_record<R: Serialize>(record: &R) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("records serialize");
    s.push('\n');
    s
}
