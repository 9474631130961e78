//! Expected length of 2-SS-BB, used to pick the phase-2 method of HSRC-2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{participation, ProtocolConfig};
use crate::error::Result;
use crate::model::Phase2Method;
use crate::two_stage::{block_resolution, build_sym2_matrix};

use super::{lambda_ii, occupancy, threshold::choose_phase2_3ss};

/// Above this many types the block expectation is sampled rather than enumerated.
const ENUMERATION_LIMIT: usize = 10;
const SAMPLED_BLOCKS: usize = 20_000;
const SAMPLING_SEED: u64 = 0x2551_bb00;
/// Capped vectors less likely than this contribute nothing measurable.
const NEGLIGIBLE: f64 = 1e-14;

/// Probability that a block holds 0, 1, or 2+ nodes of each type.
fn capped_probs(n: &[f64], rough: &[f64], ell: u64) -> Vec<[f64; 3]> {
    n.iter()
        .zip(rough)
        .map(|(&nb, &r)| {
            let o = occupancy(nb, participation(ell, r), ell);
            [o.u, o.v, (1.0 - o.u - o.v).max(0.0)]
        })
        .collect()
}

fn enumerate(probs: &[[f64; 3]]) -> Result<f64> {
    let types = probs.len();
    let mut counts = vec![0u32; types];
    let mut total = 0.0;
    fn walk(
        i: usize,
        weight: f64,
        probs: &[[f64; 3]],
        counts: &mut Vec<u32>,
        total: &mut f64,
    ) -> Result<()> {
        if weight < NEGLIGIBLE {
            return Ok(());
        }
        if i == probs.len() {
            if counts.iter().any(|&c| c > 0) {
                *total += weight * block_resolution(counts)?.slots as f64;
            }
            return Ok(());
        }
        for c in 0..3u32 {
            counts[i] = c;
            walk(i + 1, weight * probs[i][c as usize], probs, counts, total)?;
        }
        Ok(())
    }
    walk(0, 1.0, probs, &mut counts, &mut total)?;
    Ok(total)
}

fn sample(probs: &[[f64; 3]]) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let mut counts = vec![0u32; probs.len()];
    let mut total = 0u64;
    for _ in 0..SAMPLED_BLOCKS {
        for (c, p) in counts.iter_mut().zip(probs) {
            let x: f64 = rng.gen();
            *c = if x < p[0] {
                0
            } else if x < p[0] + p[1] {
                1
            } else {
                2
            };
        }
        if counts.iter().any(|&c| c > 0) {
            total += block_resolution(&counts)?.slots;
        }
    }
    Ok(total as f64 / SAMPLED_BLOCKS as f64)
}

/// Expected stage-2 slots spent on one block.
pub fn expected_block_slots(n: &[f64], rough: &[f64], ell: u64) -> Result<f64> {
    let probs = capped_probs(n, rough, ell);
    if probs.len() <= ENUMERATION_LIMIT {
        enumerate(&probs)
    } else {
        sample(&probs)
    }
}

/// Expected 2-SS-BB length, without the instruction broadcasts that depend
/// on which blocks need a second stage. With three or fewer types this is
/// the 3-SS-BB expectation.
pub fn expected_2ss_bb_slots(n: &[f64], rough: &[f64], config: &ProtocolConfig) -> Result<f64> {
    let types = n.len();
    if types <= 3 {
        return Ok(lambda_ii(n, rough, config.ell, config.slot_width));
    }
    let ell = config.ell as f64;
    let width = build_sym2_matrix(types).width() as f64;
    Ok(width * ell
        + (ell / config.slot_width as f64).ceil()
        + ell * expected_block_slots(n, rough, config.ell)?)
}

/// Phase-2 method for HSRC-2, comparing expected lengths with the rough estimates plugged in.
pub fn choose_phase2_2ss(rough: &[f64], config: &ProtocolConfig) -> Result<Phase2Method> {
    if rough.len() <= 3 {
        return Ok(choose_phase2_3ss(rough, config));
    }
    let rep = rough.len() as f64 * config.ell as f64;
    Ok(if expected_2ss_bb_slots(rough, rough, config)? <= rep {
        Phase2Method::SSBB
    } else {
        Phase2Method::TRepBB
    })
}
