// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use rsd_core::synth::{generate_scene, render_scene, NoiseSpec, SceneParams};
use rsd_core::Map64;

use super::finish_batch;
use crate::args::SynthArgs;
use crate::error::CliResult;
use crate::formats::{emit_map, emit_record, AnnotationRecord, MAP_EXTENSION};
use crate::io::{ensure_dir, write_atomic};

pub fn scene_id(i: usize) -> String {
    format!("scene_{i:05}")
}

pub fn noise_of(args: &SynthArgs) -> NoiseSpec {
    NoiseSpec {
        additive_sigma: args.noise_sigma,
        clutter_blobs: args.clutter,
        clutter_amplitude: args.clutter_amplitude,
    }
}

/// Scene `i` of the dataset: seed `seed + i`, box count cycling through the k range.
pub fn synth_scene(args: &SynthArgs, i: usize) -> CliResult<(AnnotationRecord, Map64)> {
    let params = SceneParams {
        width: args.width,
        height: args.height,
        stride: args.stride,
        k: args.k.at(i),
        min_separation_cells: args.min_separation,
        ..SceneParams::default()
    };
    let scene = generate_scene(args.seed.wrapping_add(i as u64), &params)?;
    let map = render_scene(&scene, &noise_of(args))?;
    Ok((AnnotationRecord::from_scene(scene_id(i), &scene), map))
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    noise_of(args).validate()?;
    ensure_dir(&args.out)?;
    let failures: Vec<_> = crate::io::worker_pool()?.install(|| {
        (0..args.n)
            .into_par_iter()
            .filter_map(|i| {
                let r = synth_scene(args, i).and_then(|(rec, map)| {
                    write_atomic(
                        &args.out.join(format!("{}.json", rec.image)),
                        emit_record(&rec).as_bytes(),
                    )?;
                    write_atomic(
                        &args.out.join(format!("{}.{MAP_EXTENSION}", rec.image)),
                        emit_map(&map).as_bytes(),
                    )
                });
                r.err().map(|e| (scene_id(i), e))
            })
            .collect()
    });
    finish_batch("scenes", args.n, failures)
}
