//! Expected per-node energy of the 3-SS based schemes.

use crate::config::{participation, EnergyCosts, ProtocolConfig};
use crate::model::Phase2Method;

use super::{hit_probs, OccupancyProbs};

/// Expected per-node slot counts by radio state, and the resulting energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpectedEnergy {
    pub tx: f64,
    pub rx: f64,
    pub idle: f64,
    pub energy: f64,
}

impl ExpectedEnergy {
    fn from_counts(tx: f64, rx: f64, idle: f64, costs: &EnergyCosts) -> Self {
        ExpectedEnergy {
            tx,
            rx,
            idle,
            energy: costs.energy(tx, rx, idle),
        }
    }

    fn scaled(self, w: f64) -> Self {
        ExpectedEnergy {
            tx: self.tx * w,
            rx: self.rx * w,
            idle: self.idle * w,
            energy: self.energy * w,
        }
    }

    fn plus(self, o: Self) -> Self {
        ExpectedEnergy {
            tx: self.tx + o.tx,
            rx: self.rx + o.rx,
            idle: self.idle + o.idle,
            energy: self.energy + o.energy,
        }
    }
}

/// How the stage-1 blocks are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyMode<'a> {
    /// Phase-1 trial over `blocks` geometric blocks lasting `frame` slots.
    Trial { blocks: u32, frame: f64 },
    /// Balls-and-bins over `ell` uniform blocks with the given rough estimates, lasting `frame` slots.
    BallsAndBins { rough: &'a [f64], frame: f64 },
}

/// Probability a node lands in block `h` (1-based) of a geometric trial with `blocks` blocks.
fn geometric_block_prob(h: u32, blocks: u32) -> f64 {
    if h < blocks {
        0.5f64.powi(h as i32)
    } else {
        0.5f64.powi(blocks as i32 - 1)
    }
}

/// Expected (tx, rx) of a node of type `b` placed in a block where every
/// other node lands with probability `hit[i]`.
fn participant_counts(b: usize, n: &[f64], hit: &[f64], bp: f64) -> (f64, f64) {
    let types = n.len();
    let occ = |i: usize, exclude_self: bool| -> OccupancyProbs {
        let count = if exclude_self { n[i] - 1.0 } else { n[i] };
        hit_probs(count.max(0.0), hit[i])
    };
    if b == 0 {
        let others = occ(0, true);
        let q1 = 1.0 - others.u;
        let q2 = others.u * (1..types).map(|i| 1.0 - occ(i, false).u).product::<f64>();
        ((types as f64 - 1.0) + q1 + q2, bp)
    } else {
        let first = occ(0, false);
        let own = occ(b, true);
        let rest = || (1..types).filter(move |&i| i != b);
        let q1 = 1.0 - first.u - first.v;
        let q2 = first.v * rest().map(|i| 1.0 - occ(i, false).u).product::<f64>();
        let q3 = first.u
            * (1.0 - own.u)
            * rest()
                .map(|i| {
                    let o = occ(i, false);
                    1.0 - o.u - o.v
                })
                .product::<f64>();
        (1.0 + q1, bp + q1 + q2 + q3)
    }
}

/// Expected per-node energy of each type for one 3-SS run. The frame length
/// is supplied by the caller, either from the closed form or measured.
pub fn expected_energy_3ss(
    n: &[f64],
    config: &ProtocolConfig,
    mode: &EnergyMode,
) -> Vec<ExpectedEnergy> {
    let costs = &config.energy;
    let types = n.len();
    match mode {
        EnergyMode::Trial { blocks, frame } => {
            let bp = (*blocks as f64 / config.slot_width as f64).ceil();
            (0..types)
                .map(|b| {
                    (1..=*blocks).fold(ExpectedEnergy::default(), |acc, h| {
                        let q = geometric_block_prob(h, *blocks);
                        let hit = vec![q; types];
                        let (tx, rx) = participant_counts(b, n, &hit, bp);
                        let e = ExpectedEnergy::from_counts(tx, rx, frame - tx - rx, costs);
                        acc.plus(e.scaled(q))
                    })
                })
                .collect()
        }
        EnergyMode::BallsAndBins { rough, frame } => {
            let ell = config.ell;
            let bp = (ell as f64 / config.slot_width as f64).ceil();
            let p: Vec<f64> = rough.iter().map(|&r| participation(ell, r)).collect();
            let hit: Vec<f64> = p.iter().map(|&x| x / ell as f64).collect();
            (0..types)
                .map(|b| {
                    let (tx, rx) = participant_counts(b, n, &hit, bp);
                    let taking_part =
                        ExpectedEnergy::from_counts(tx, rx, frame - tx - rx, costs).scaled(p[b]);
                    let idle =
                        ExpectedEnergy::from_counts(0.0, 0.0, *frame, costs).scaled(1.0 - p[b]);
                    taking_part.plus(idle)
                })
                .collect()
        }
    }
}

/// Expected per-node energy of T-Rep-BB for a type with the given rough estimate.
/// The node sleeps through the other types' trials.
pub fn expected_energy_trepbb(rough: f64, config: &ProtocolConfig) -> f64 {
    let p = config.participation(rough);
    p * config.energy.transmit + (config.ell as f64 - p) * config.energy.idle
}

/// Expected per-node energy of HSRC-1: `m_prime` phase-1 trials of
/// `trial_frame` slots each, then the chosen phase-2 method lasting
/// `phase2_frame` slots when it is 3-SS-BB.
pub fn expected_energy_hsrc1(
    n: &[f64],
    rough: &[f64],
    config: &ProtocolConfig,
    method: Phase2Method,
    trial_frame: f64,
    phase2_frame: f64,
) -> Vec<f64> {
    let trial = expected_energy_3ss(
        n,
        config,
        &EnergyMode::Trial {
            blocks: config.blocks,
            frame: trial_frame,
        },
    );
    let phase2: Vec<f64> = match method {
        Phase2Method::TRepBB => rough
            .iter()
            .map(|&r| expected_energy_trepbb(r, config))
            .collect(),
        Phase2Method::SSBB => expected_energy_3ss(
            n,
            config,
            &EnergyMode::BallsAndBins {
                rough,
                frame: phase2_frame,
            },
        )
        .iter()
        .map(|e| e.energy)
        .collect(),
    };
    trial
        .iter()
        .zip(phase2)
        .map(|(t, p2)| config.m_prime as f64 * t.energy + p2)
        .collect()
}
