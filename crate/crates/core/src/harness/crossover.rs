//! Where 3-SS-BB and T-Rep-BB take equally long, from the closed form and by simulation.

use rayon::prelude::*;

use crate::analysis::{crossover_ratio, zeta, ThresholdKind};
use crate::config::{derive_config_with, ConfigOverrides, ProtocolConfig};
use crate::error::Result;
use crate::model::PopulationSpec;
use crate::rng::Streams;
use crate::three_stage::run_3ss_bb;

use super::DEFAULT_MANUFACTURED;

fn bb_config(types: usize, ell: u64) -> Result<ProtocolConfig> {
    derive_config_with(
        0.03,
        0.2,
        &vec![DEFAULT_MANUFACTURED; types],
        6,
        ConfigOverrides {
            ell: Some(ell),
            ..Default::default()
        },
    )
}

/// Mean 3-SS-BB length minus `T * ell` when type 1 has `n1` nodes and every
/// other type `others`, rough estimates equal to the truth.
fn excess_slots(
    config: &ProtocolConfig,
    types: usize,
    n1: u64,
    others: u64,
    replicates: u32,
    seed: u64,
) -> Result<f64> {
    let mut counts = vec![others; types];
    counts[0] = n1;
    let rough: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let pop = PopulationSpec::with_common_total(counts, DEFAULT_MANUFACTURED)?;
    let total: u64 = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let streams = Streams::new(seed).replicate(r as u64);
            Ok(run_3ss_bb(&pop, &rough, config, &streams)?
                .stage
                .ledger
                .total)
        })
        .sum::<Result<u64>>()?;
    Ok(total as f64 / replicates as f64 - (types as u64 * config.ell) as f64)
}

/// Simulated `n1* / ell`: the type-1 count at which the mean 3-SS-BB length
/// reaches `T * ell`, found by bisection with common random numbers.
/// `None` when no crossing lies below `1.6 * ell`.
pub fn empirical_crossover(
    types: usize,
    ell: u64,
    others: u64,
    replicates: u32,
    seed: u64,
) -> Result<Option<f64>> {
    let config = bb_config(types, ell)?;
    let mut lo = 0u64;
    let mut hi = (1.6 * ell as f64) as u64;
    if excess_slots(&config, types, lo, others, replicates, seed)? > 0.0
        || excess_slots(&config, types, hi, others, replicates, seed)? <= 0.0
    {
        return Ok(None);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if excess_slots(&config, types, mid, others, replicates, seed)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((lo as f64 + 0.5) / ell as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub types: usize,
    pub ell: u64,
    /// Other types' counts as a multiple of `ell`.
    pub others_ratio: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub crossover_analytic: Option<f64>,
    pub crossover_empirical: Option<f64>,
}

/// Thresholds and crossovers for each `T` in `types`. Simulation runs only
/// when `replicates` is given.
pub fn threshold_table(
    types: impl IntoIterator<Item = usize>,
    ells: &[u64],
    others_ratio: f64,
    replicates: Option<u32>,
    seed: u64,
) -> Result<Vec<ThresholdRow>> {
    let mut rows = Vec::new();
    for t in types {
        for &ell in ells {
            let others = (others_ratio * ell as f64).round() as u64;
            let crossover_empirical = match replicates {
                Some(r) => empirical_crossover(t, ell, others, r, seed)?,
                None => None,
            };
            rows.push(ThresholdRow {
                types: t,
                ell,
                others_ratio,
                zeta1: zeta(t, ThresholdKind::Lower)?,
                zeta2: zeta(t, ThresholdKind::Upper)?,
                crossover_analytic: crossover_ratio(t, ell, 6, others_ratio),
                crossover_empirical,
            });
        }
    }
    Ok(rows)
}
