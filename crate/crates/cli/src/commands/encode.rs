// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use rsd_core::encoder::{encode_gt, EncoderConfig};
use rsd_core::Map64;

use super::finish_batch;
use crate::args::EncodeArgs;
use crate::error::CliResult;
use crate::formats::{emit_map, AnnotationRecord, MAP_EXTENSION};
use crate::io::{ensure_dir, read_records, worker_pool, write_atomic};

pub fn encode_record(rec: &AnnotationRecord, stride: Option<u32>) -> CliResult<Option<Map64>> {
    rec.validate()?;
    let Some(boxes) = rec.gt_boxes()? else {
        return Ok(None);
    };
    let cfg = EncoderConfig::new(rec.width, rec.height, stride.unwrap_or(rec.stride))?;
    Ok(Some(encode_gt(&boxes, &cfg)?))
}

pub fn run(args: &EncodeArgs) -> CliResult<()> {
    let records: Vec<AnnotationRecord> = read_records(&args.annotations)?;
    ensure_dir(&args.out)?;
    let failures: Vec<_> = worker_pool()?.install(|| {
        records
            .par_iter()
            .filter_map(|rec| {
                let r = encode_record(rec, args.stride).and_then(|map| match map {
                    Some(map) => {
                        let path = args.out.join(format!("{}.{MAP_EXTENSION}", rec.image));
                        write_atomic(&path, emit_map(&map).as_bytes())
                    }
                    None => {
                        log::warn!("{}: count-only record, no map written", rec.image);
                        Ok(())
                    }
                });
                r.err().map(|e| (rec.image.clone(), e))
            })
            .collect()
    });
    finish_batch("records", records.len(), failures)
}
