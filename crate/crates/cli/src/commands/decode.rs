// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use rsd_core::decoder::{detect, SubitizingOutput};
use rsd_core::Map64;
use serde::Deserialize;

use super::finish_batch;
use crate::args::DecodeArgs;
use crate::error::{validation, CliError, CliResult};
use crate::formats::{emit_record, parse_map_bytes, parse_records, DetectionRecord, SubitizingRecord};
use crate::io::{collect_files, ensure_dir, image_id, read_bytes, read_text, worker_pool, write_atomic};

pub const MAP_INPUTS: [&str; 2] = ["rsdmap", "pgm"];

/// Sidecar entry: a detection record carries `subitizing`, an annotation record `count`.
#[derive(Deserialize)]
struct SidecarEntry {
    image: String,
    subitizing: Option<SubitizingRecord>,
    count: Option<usize>,
}

pub enum SubitizingSource {
    Uniform(SubitizingOutput<f64>),
    PerImage(HashMap<String, SubitizingOutput<f64>>),
}

impl SubitizingSource {
    pub fn from_args(args: &DecodeArgs) -> CliResult<Self> {
        match (&args.sub_category, args.subitizing.is_empty()) {
            (Some(_), false) => Err(validation("use either --subitizing or --sub-category, not both")),
            (Some(c), true) => Ok(Self::Uniform(SubitizingOutput::new(*c, args.sub_confidence)?)),
            (None, true) => Err(validation("decode needs --subitizing or --sub-category")),
            (None, false) => {
                let mut table = HashMap::new();
                for p in collect_files(&args.subitizing, &["json"])? {
                    let source = p.display().to_string();
                    for e in parse_records::<SidecarEntry>(&read_text(&p)?, &source)? {
                        let sub = match (e.subitizing, e.count) {
                            (Some(s), _) => s.to_output()?,
                            (None, Some(n)) => SubitizingOutput::exact(n),
                            (None, None) => {
                                return Err(CliError::parse(
                                    &source,
                                    format!("{}: no subitizing or count", e.image),
                                ))
                            }
                        };
                        table.insert(e.image, sub);
                    }
                }
                Ok(Self::PerImage(table))
            }
        }
    }

    pub fn get(&self, id: &str) -> CliResult<SubitizingOutput<f64>> {
        match self {
            Self::Uniform(s) => Ok(*s),
            Self::PerImage(t) => t
                .get(id)
                .copied()
                .ok_or_else(|| validation("no subitizing record")),
        }
    }
}

pub fn decode_map(
    id: &str,
    map: &Map64,
    sub: SubitizingOutput<f64>,
    args: &DecodeArgs,
) -> CliResult<DetectionRecord> {
    let cfg = args.decoder.config(map.width(), map.height());
    cfg.validate()?;
    let result = detect(map, &sub, &cfg)?;
    Ok(DetectionRecord::from_result(id, &result, sub))
}

fn decode_file(path: &Path, subs: &SubitizingSource, args: &DecodeArgs) -> CliResult<()> {
    let id = image_id(path)?;
    let sub = subs.get(&id)?;
    let map: Map64 = parse_map_bytes(&read_bytes(path)?, &path.display().to_string())?;
    let rec = decode_map(&id, &map, sub, args)?;
    write_atomic(&args.out.join(format!("{id}.json")), emit_record(&rec).as_bytes())
}

pub fn run(args: &DecodeArgs) -> CliResult<()> {
    args.decoder.config(1, 1).validate()?;
    let subs = SubitizingSource::from_args(args)?;
    let maps = collect_files(&args.maps, &MAP_INPUTS)?;
    ensure_dir(&args.out)?;
    let failures: Vec<_> = worker_pool()?.install(|| {
        maps.par_iter()
            .filter_map(|p| {
                decode_file(p, &subs, args)
                    .err()
                    .map(|e| (p.display().to_string(), e))
            })
            .collect()
    });
    finish_batch("maps", maps.len(), failures)
}
