// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsd_core::decoder::{DecodeResolution, DecoderConfig};
use rsd_core::eval::SizeStrata;
use rsd_core::CountCategory;

#[derive(Debug, Parser)]
#[command(
    name = "rsd",
    version,
    about = "Encode, decode and evaluate salient object maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render Gaussian ground-truth maps from annotation records.
    EncodeGt(EncodeArgs),
    /// Turn saliency maps plus subitizing outputs into detection records.
    Decode(DecodeArgs),
    /// Box precision/recall per IoU threshold and size band.
    EvalDet(EvalDetArgs),
    /// Pixel precision/recall curve of maps against ground-truth masks.
    EvalMap(EvalMapArgs),
    /// Counting accuracy and confusion matrix.
    EvalCount(EvalCountArgs),
    /// Generate a synthetic dataset of annotations and rendered maps.
    Synth(SynthArgs),
    /// Compare analytic loss gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Single-threaded decoder latency and throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    #[value(name = "224")]
    P224,
    #[value(name = "448")]
    P448,
}

impl Profile {
    pub fn input_size(self) -> u32 {
        match self {
            Profile::P224 => 224,
            Profile::P448 => 448,
        }
    }

    pub fn decoder(self) -> DecoderConfig<f64> {
        match self {
            Profile::P224 => DecoderConfig::profile_224(),
            Profile::P448 => DecoderConfig::profile_448(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodeRes {
    Native,
    Upsampled,
}

#[derive(Debug, Clone, Args)]
pub struct DecoderArgs {
    /// Input pixels per map cell.
    #[arg(long, default_value_t = 16)]
    pub stride: u32,
    #[arg(long, default_value_t = 0.7)]
    pub theta_c: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.95,0.9,0.8,0.6")]
    pub peak_thresholds: Vec<f64>,
    /// Overrides the profile's smoothing sigma.
    #[arg(long)]
    pub smooth_sigma: Option<f64>,
    /// Smoothing preset.
    #[arg(long, value_enum, default_value = "224")]
    pub profile: Profile,
    /// Decode on the map grid or after upsampling by the stride.
    #[arg(long, value_enum, default_value = "upsampled")]
    pub decode_res: DecodeRes,
    /// Expand boxes to undo threshold shrinkage.
    #[arg(long)]
    pub box_rescale: bool,
}

impl DecoderArgs {
    /// Decoder settings for a map of the given size.
    pub fn config(&self, map_width: usize, map_height: usize) -> DecoderConfig<f64> {
        let base = self.profile.decoder();
        let stride = self.stride as usize;
        DecoderConfig {
            theta_c: self.theta_c,
            peak_thresholds: self.peak_thresholds.clone(),
            smooth_sigma: self.smooth_sigma.unwrap_or(base.smooth_sigma),
            decode_resolution: match self.decode_res {
                DecodeRes::Native => DecodeResolution::Native,
                DecodeRes::Upsampled => DecodeResolution::Upsampled {
                    width: map_width * stride,
                    height: map_height * stride,
                },
            },
            box_rescale: self.box_rescale,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    /// Annotation files or directories of them.
    #[arg(required = true)]
    pub annotations: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Overrides the stride stored in each record.
    #[arg(long)]
    pub stride: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// Map files (.rsdmap text or .pgm) or directories of them.
    #[arg(required = true)]
    pub maps: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Detection or annotation records supplying per-image subitizing; annotations count as
    /// exact subitizing with confidence 1.
    #[arg(long)]
    pub subitizing: Vec<PathBuf>,
    /// Uniform subitizing category for every map.
    #[arg(long)]
    pub sub_category: Option<CountCategory>,
    #[arg(long, default_value_t = 1.0)]
    pub sub_confidence: f64,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

fn parse_strata(s: &str) -> Result<SizeStrata, String> {
    let mut small = None;
    let mut large = None;
    for part in s.split(',') {
        let (key, dims) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=AxB in {part:?}"))?;
        let (a, b) = dims
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected AxB in {dims:?}"))?;
        let side = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad size {t:?}"));
        let area = side(a)? * side(b)?;
        match key.trim() {
            "small" => small = Some(area),
            "large" => large = Some(area),
            k => return Err(format!("unknown stratum {k:?}")),
        }
    }
    let d = SizeStrata::default();
    SizeStrata::new(
        small.unwrap_or(d.small_max_area),
        large.unwrap_or(d.large_min_area),
    )
    .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct EvalDetArgs {
    /// Detection records.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Annotation records.
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub taus: Vec<f64>,
    /// Area bands, e.g. `small=75x75,large=200x200`.
    #[arg(long, value_parser = parse_strata, default_value = "small=75x75,large=200x200")]
    pub strata: SizeStrata,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalMapArgs {
    /// Predicted maps.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth masks; cells at or above 0.5 are foreground.
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Thresholds; defaults to 0, 0.01, ..., 1.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CountSource {
    /// Category of the decoded box count.
    Decoded,
    /// Category of the subitizing input.
    Subitizing,
}

#[derive(Debug, Clone, Args)]
pub struct EvalCountArgs {
    /// Detection records.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Annotation records.
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "decoded")]
    pub source: CountSource,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Inclusive range of box counts, written `K` or `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl std::str::FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad count {t:?}"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
            None => (num(s)?, num(s)?),
        };
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Self { lo, hi })
    }
}

impl KRange {
    /// Counts cycle through the range by scene index.
    pub fn at(&self, i: usize) -> usize {
        self.lo + i % (self.hi - self.lo + 1)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Box count or inclusive range such as `1..3`.
    #[arg(long, default_value = "1")]
    pub k: KRange,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Number of sub-threshold clutter bumps.
    #[arg(long, default_value_t = 0)]
    pub clutter: usize,
    #[arg(long, default_value_t = 0.4)]
    pub clutter_amplitude: f64,
    #[arg(long, default_value_t = 224)]
    pub width: u32,
    #[arg(long, default_value_t = 224)]
    pub height: u32,
    #[arg(long, default_value_t = 16)]
    pub stride: u32,
    /// Minimum empty cells between object regions.
    #[arg(long, default_value_t = 3)]
    pub min_separation: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Offset added to every analytic gradient; a negative control that must fail.
    #[arg(long, default_value_t = 0.0, hide = true)]
    pub perturb: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "224")]
    pub profile: Profile,
    /// Timed decodes.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Distinct pre-generated maps cycled through.
    #[arg(long, default_value_t = 64)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
