//! Empirical accuracy checks and calibration of the balls-and-bins trial length.

use rayon::prelude::*;

use crate::config::{blocks_for, derive_config_with, ConfigOverrides};
use crate::error::{Error, Result};
use crate::homogeneous::srcs;
use crate::rng::Streams;

use super::{replicate_streams, run_replicate, Activity, Scenario, Scheme, DEFAULT_MANUFACTURED};

const WILSON_Z: f64 = 1.959_963_984_540_054;
const MAX_ELL: u64 = 1 << 20;

/// Wilson score interval at 95% for `hits` successes out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Share of estimates of one type within `epsilon` of the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRate {
    pub type_index: usize,
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-type accuracy of `scheme` pooled over every population in `grid`,
/// `replicates` frames each. The scenario supplies everything but the counts.
pub fn validate_accuracy(
    scheme: Scheme,
    grid: &[Vec<u64>],
    scenario: &Scenario,
    replicates: u32,
    seed: u64,
) -> Result<Vec<AccuracyRate>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("population grid"));
    }
    if replicates == 0 {
        return Err(Error::config("replicates", "must be at least 1"));
    }
    let config = scenario.config()?;
    let types = scenario.types;
    let mut hits = vec![0u64; types];
    let mut trials = 0u64;
    for (gi, counts) in grid.iter().enumerate() {
        let point = Scenario {
            activity: Activity::Fixed(counts.clone()),
            ..scenario.clone()
        };
        let within: Vec<Vec<bool>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let res = run_replicate(scheme, &point, &config, &replicate_streams(seed, gi, r))?;
                Ok(res
                    .truth
                    .iter()
                    .zip(&res.estimates)
                    .map(|(&n, &e)| (e - n as f64).abs() <= config.epsilon * n as f64 + 1e-9)
                    .collect())
            })
            .collect::<Result<_>>()?;
        for w in &within {
            for (b, &ok) in w.iter().enumerate() {
                hits[b] += ok as u64;
            }
        }
        trials += replicates as u64;
    }
    Ok(hits
        .iter()
        .enumerate()
        .map(|(b, &h)| {
            let (lower, upper) = wilson_interval(h, trials);
            AccuracyRate {
                type_index: b,
                hits: h,
                trials,
                rate: h as f64 / trials as f64,
                lower,
                upper,
            }
        })
        .collect())
}

/// Lowest accuracy of a single-type SRC_S run over the grid at trial length `ell`.
fn srcs_accuracy(
    ell: u64,
    epsilon: f64,
    delta: f64,
    grid: &[u64],
    replicates: u32,
    seed: u64,
) -> Result<f64> {
    let config = derive_config_with(
        epsilon,
        delta,
        &[DEFAULT_MANUFACTURED],
        6,
        ConfigOverrides {
            ell: Some(ell),
            ..Default::default()
        },
    )?;
    let t = blocks_for(DEFAULT_MANUFACTURED);
    let mut worst = 1.0f64;
    for (gi, &n) in grid.iter().enumerate() {
        let hits: u64 = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let streams = Streams::new(seed).replicate(gi as u64).replicate(r as u64);
                let run = srcs(n, t, &config, &streams, 0)?;
                Ok(((run.estimate - n as f64).abs() <= epsilon * n as f64 + 1e-9) as u64)
            })
            .sum::<Result<u64>>()?;
        worst = worst.min(hits as f64 / replicates as f64);
    }
    Ok(worst)
}

/// Smallest trial length whose SRC_S accuracy reaches `1 - delta` at every
/// count in `grid`. Every candidate length replays the same random draws.
pub fn calibrate_ell(
    epsilon: f64,
    delta: f64,
    grid: &[u64],
    replicates: u32,
    seed: u64,
) -> Result<u64> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("count grid"));
    }
    if replicates == 0 {
        return Err(Error::config("replicates", "must be at least 1"));
    }
    let target = 1.0 - delta;
    let ok = |ell: u64| -> Result<bool> {
        Ok(srcs_accuracy(ell, epsilon, delta, grid, replicates, seed)? >= target)
    };
    let mut hi = 16u64;
    while !ok(hi)? {
        hi *= 2;
        if hi > MAX_ELL {
            return Err(Error::config(
                "epsilon",
                format!("no trial length up to {MAX_ELL} reaches accuracy {target}"),
            ));
        }
    }
    let mut lo = hi / 2;
    if lo == 0 || ok(lo)? {
        return Ok(lo.max(1));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
