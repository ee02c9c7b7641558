// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use rsd_core::decoder::{detect, DecoderConfig, SubitizingOutput};
use rsd_core::synth::{generate_scene, render_scene, NoiseSpec, SceneParams};
use rsd_core::Map64;
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, Profile};
use crate::error::{validation, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub profile: u32,
    pub iterations: usize,
    pub median_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    /// Reciprocal of the median latency.
    pub decodes_per_sec: f64,
}

/// Native maps for the profile's input size with one to three objects each, plus exact counts.
pub fn bench_inputs(
    profile: Profile,
    scenes: usize,
    seed: u64,
) -> CliResult<Vec<(Map64, SubitizingOutput<f64>)>> {
    let size = profile.input_size();
    let base = SceneParams {
        width: size,
        height: size,
        size_range: if profile == Profile::P448 { (4, 8) } else { (2, 4) },
        ..SceneParams::default()
    };
    (0..scenes)
        .map(|i| {
            let k = 1 + i % 3;
            let scene = generate_scene(seed.wrapping_add(i as u64), &base.with_k(k))?;
            Ok((
                render_scene(&scene, &NoiseSpec::none())?,
                SubitizingOutput::exact(k),
            ))
        })
        .collect()
}

pub fn bench_config(profile: Profile) -> DecoderConfig<f64> {
    DecoderConfig {
        box_rescale: true,
        ..profile.decoder()
    }
}

/// Times `iterations` decodes on the calling thread; input generation is not timed.
pub fn bench(profile: Profile, iterations: usize, scenes: usize, seed: u64) -> CliResult<BenchReport> {
    if iterations == 0 || scenes == 0 {
        return Err(validation("bench needs at least one iteration and one scene"));
    }
    let inputs = bench_inputs(profile, scenes, seed)?;
    let cfg = bench_config(profile);
    let mut lat_us = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let (map, sub) = &inputs[i % inputs.len()];
        let start = Instant::now();
        black_box(detect(black_box(map), sub, &cfg)?);
        lat_us.push(start.elapsed().as_secs_f64() * 1e6);
    }
    lat_us.sort_by(f64::total_cmp);
    let rank = |q: f64| lat_us[((q * iterations as f64).ceil() as usize).clamp(1, iterations) - 1];
    let median_us = rank(0.5);
    Ok(BenchReport {
        profile: profile.input_size(),
        iterations,
        median_us,
        p99_us: rank(0.99),
        mean_us: lat_us.iter().sum::<f64>() / iterations as f64,
        decodes_per_sec: 1e6 / median_us,
    })
}

pub fn run(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let report = bench(args.profile, args.n, args.scenes, args.seed)?;
    let text = serde_json::to_string(&report).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| CliError::Io {
        context: "stdout".into(),
        source: e,
    })
}
