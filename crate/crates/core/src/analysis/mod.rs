//! Closed-form models: block occupancy, expected follow-up sizes, expected
//! slot counts, phase-2 selection thresholds and expected energy.

pub mod energy;
pub mod threshold;
pub mod two_stage_cost;

pub use energy::{
    expected_energy_3ss, expected_energy_hsrc1, expected_energy_trepbb, EnergyMode, ExpectedEnergy,
};
pub use threshold::{
    choose_phase2_3ss, crossover_ratio, f, f1, g1, g2, select_phase2, zeta, Selection,
    ThresholdKind,
};
pub use two_stage_cost::{choose_phase2_2ss, expected_2ss_bb_slots};

use crate::config::participation;

/// Probabilities that no node (`u`) or exactly one node (`v`) of a group lands in a given block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyProbs {
    pub u: f64,
    pub v: f64,
}

/// `n` nodes each hitting a given block with probability `hit`.
pub fn hit_probs(n: f64, hit: f64) -> OccupancyProbs {
    let n = n.max(0.0);
    if n == 0.0 || hit <= 0.0 {
        return OccupancyProbs { u: 1.0, v: 0.0 };
    }
    if hit >= 1.0 {
        let v = if (n - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
        return OccupancyProbs { u: 0.0, v };
    }
    let miss = 1.0 - hit;
    OccupancyProbs {
        u: miss.powf(n),
        v: n * hit * miss.powf(n - 1.0),
    }
}

/// Uniform block choice over `ell` blocks with participation `p`.
pub fn occupancy(n: f64, p: f64, ell: u64) -> OccupancyProbs {
    hit_probs(n, p / ell as f64)
}

/// Probabilities of the three ways a block can collide in every slot:
/// two or more type-1 nodes; exactly one type-1 node with every other type
/// present; no type-1 node with two or more of every other type.
pub fn q_probs(n: &[f64], rough: &[f64], ell: u64) -> (f64, f64, f64) {
    let occ: Vec<OccupancyProbs> = n
        .iter()
        .zip(rough)
        .map(|(&nb, &r)| occupancy(nb, participation(ell, r), ell))
        .collect();
    let first = occ[0];
    let rest = &occ[1..];
    let q1 = 1.0 - first.u - first.v;
    let q2 = first.v * rest.iter().map(|o| 1.0 - o.u).product::<f64>();
    let q3 = first.u * rest.iter().map(|o| 1.0 - o.u - o.v).product::<f64>();
    (q1.max(0.0), q2.max(0.0), q3.max(0.0))
}

/// Expected stage-2 slots (flagged blocks) and expected stage-3 block count of 3-SS-BB.
pub fn expected_k_r(n: &[f64], rough: &[f64], ell: u64) -> (f64, f64) {
    let (q1, q2, q3) = q_probs(n, rough, ell);
    let l = ell as f64;
    (l * (q1 + q2 + q3), l * q1)
}

fn ceil_ratio(x: f64, width: u32) -> f64 {
    (x / width as f64).ceil()
}

/// Expected slots of one 3-SS trial given the mean flagged and stage-3 block counts.
pub fn lambda_i(types: usize, blocks: u32, slot_width: u32, mean_k: f64, mean_r: f64) -> f64 {
    let t1 = types as f64 - 1.0;
    t1 * blocks as f64
        + ceil_ratio(blocks as f64, slot_width)
        + mean_k
        + ceil_ratio(mean_k, slot_width)
        + t1 * mean_r
}

/// Expected slots of 3-SS-BB.
pub fn lambda_ii(n: &[f64], rough: &[f64], ell: u64, slot_width: u32) -> f64 {
    let (ek, er) = expected_k_r(n, rough, ell);
    let t1 = n.len() as f64 - 1.0;
    t1 * ell as f64 + ceil_ratio(ell as f64, slot_width) + ek + ceil_ratio(ek, slot_width) + t1 * er
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_values() {
        assert_eq!(occupancy(0.0, 0.5, 10), OccupancyProbs { u: 1.0, v: 0.0 });
        assert_eq!(occupancy(5.0, 0.0, 10), OccupancyProbs { u: 1.0, v: 0.0 });
        let o = occupancy(10.0, 1.0, 10);
        assert!((o.u - 0.9f64.powi(10)).abs() < 1e-15);
        assert!((o.v - 0.9f64.powi(9)).abs() < 1e-15);
    }

    #[test]
    fn occupancy_matches_exhaustive_enumeration() {
        // 10 nodes, 10 blocks: count assignments leaving block 0 empty or singly occupied.
        let nodes = 10u32;
        let blocks = 10u64;
        let total = blocks.pow(nodes) as f64;
        let empty = (blocks - 1).pow(nodes) as f64;
        let single = nodes as f64 * (blocks - 1).pow(nodes - 1) as f64;
        let o = occupancy(nodes as f64, 1.0, blocks);
        assert!((o.u - empty / total).abs() < 1e-12);
        assert!((o.v - single / total).abs() < 1e-12);
    }

    #[test]
    fn q_limits() {
        let (a, b, c) = q_probs(&[0.0; 4], &[1.2897; 4], 3009);
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));
        let big = 1e7;
        let (q1, _, _) = q_probs(&[big, 0.0], &[big, 1.0], 3009);
        let lim = 1.0 - (-1.6f64).exp() - 1.6 * (-1.6f64).exp();
        assert!((q1 - lim).abs() < 1e-4);
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_i(3, 7, 6, 0.0, 0.0), 16.0);
        assert!(lambda_i(3, 7, 6, 1.0, 0.0) > lambda_i(3, 7, 6, 0.0, 0.0));
        assert_eq!(lambda_ii(&[0.0; 3], &[1.0; 3], 3009, 6), 6520.0);
        let r = [1500.0, 6018.0, 6018.0];
        assert!(lambda_ii(&r, &r, 3009, 6) < 9027.0);
        let r = [4000.0, 6018.0, 6018.0];
        assert!(lambda_ii(&r, &r, 3009, 6) > 9027.0);
    }
}
