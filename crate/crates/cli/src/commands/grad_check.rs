// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsd_core::loss::{
    central_difference, multitask_grad, multitask_loss, relative_error, weighted_euclidean_grad,
    weighted_euclidean_loss,
};
use rsd_core::{CountCategory, CountDistribution, LossConfig};
use serde::Serialize;

use crate::args::GradCheckArgs;
use crate::error::{validation, CliError, CliResult};

pub const TOLERANCE: f64 = 1e-5;
pub const STEP: f64 = 1e-5;
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub max_rel_err: f64,
    pub worst_trial: usize,
    pub passed: bool,
}

/// Trial 0 always uses a single cell.
pub fn grad_check(seed: u64, trials: usize, perturb: f64) -> CliResult<GradCheckReport> {
    if trials == 0 {
        return Err(validation("grad-check needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut worst_trial) = (0.0f64, 0);
    for t in 0..trials {
        let d = if t == 0 { 1 } else { rng.random_range(1..=MAX_DIM) };
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..1.5)).collect();
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = LossConfig {
            alpha: rng.random_range(1.0..10.0),
            lambda: rng.random_range(0.0..1.0),
        };
        let n = CountCategory::ALL[rng.random_range(0..4)];
        let n_box = if rng.random_bool(0.5) {
            Some(rng.random_range(0..5))
        } else {
            None
        };
        let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
        let total: f64 = raw.iter().sum();
        let y = CountDistribution::new(raw.map(|p| p / total))?;

        let mut sal = weighted_euclidean_grad(&x, &g, cfg.alpha)?;
        let sal_fd = central_difference(&x, STEP, |v| {
            weighted_euclidean_loss(v, &g, cfg.alpha).expect("valid shapes")
        });
        let mut multi = multitask_grad(&x, &g, n, &cfg, n_box)?;
        let multi_fd = central_difference(&x, STEP, |v| {
            multitask_loss(v, &g, &y, n, &cfg, n_box).expect("valid shapes")
        });
        sal.iter_mut().chain(multi.iter_mut()).for_each(|v| *v += perturb);

        let err = relative_error(&sal, &sal_fd).max(relative_error(&multi, &multi_fd));
        if err > worst || err.is_nan() {
            worst = if err.is_nan() { f64::INFINITY } else { err };
            worst_trial = t;
        }
    }
    Ok(GradCheckReport {
        trials,
        max_rel_err: worst,
        worst_trial,
        passed: worst < TOLERANCE,
    })
}

pub fn run(args: &GradCheckArgs, out: &mut dyn Write) -> CliResult<()> {
    let r = grad_check(args.seed, args.trials, args.perturb)?;
    let verdict = if r.passed { "PASS" } else { "FAIL" };
    writeln!(
        out,
        "trials {}\nmax_rel_err {:e}\nworst_trial {}\ntolerance {:e}\n{verdict}",
        r.trials, r.max_rel_err, r.worst_trial, TOLERANCE
    )
    .map_err(|e| CliError::Io {
        context: "stdout".into(),
        source: e,
    })?;
    if r.passed {
        Ok(())
    } else {
        Err(validation(format!(
            "gradient check failed: max relative error {:e} >= {TOLERANCE:e}",
            r.max_rel_err
        )))
    }
}
