//! Single-type estimators: the LoF first-empty-slot trial, the two-phase
//! SRC_S protocol, and the per-type repetition baselines built from them.

use rand::{Rng, RngCore};

use crate::config::{blocks_for, EnergyCosts, ProtocolConfig};
use crate::error::{Error, Result};
use crate::ledger::{EnergyLedger, EstimateReport, SlotLedger};
use crate::model::PopulationSpec;
use crate::rng::{Purpose, Streams};

/// Multiplier of the LoF estimate.
pub const LOF_SCALE: f64 = 1.2897;

/// Parameters of a sequence of LoF trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LofTrialPlan {
    /// Slots per trial.
    pub t: u32,
    /// Number of trials.
    pub m: u32,
    /// Two-sided normal quantile at the target error probability.
    pub c: f64,
}

impl LofTrialPlan {
    pub fn new(t: u32, m: u32, c: f64) -> Result<Self> {
        if t == 0 || t > 64 {
            return Err(Error::config("t", format!("{t} not in 1..=64")));
        }
        if m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        Ok(LofTrialPlan { t, m, c })
    }
}

/// Slot chosen by one node: `i` with probability `2^-i`, the tail mass going to slot `t`.
pub fn lof_slot_index<R: RngCore + ?Sized>(rng: &mut R, t: u32) -> u32 {
    let r = rng.next_u64();
    let zeros = if r == 0 { 64 } else { r.trailing_zeros() };
    (zeros + 1).min(t)
}

/// One LoF trial among `n` nodes over `t` slots; returns the first empty slot,
/// or `t` when every slot is occupied.
pub fn lof_trial<R: RngCore + ?Sized>(n: u64, t: u32, rng: &mut R) -> u32 {
    assert!((1..=64).contains(&t), "t must be in 1..=64");
    let mut occupied = 0u64;
    for _ in 0..n {
        occupied |= 1 << (lof_slot_index(rng, t) - 1);
    }
    first_vacant(occupied, t)
}

pub(crate) fn first_vacant(occupied: u64, t: u32) -> u32 {
    let j = (!occupied).trailing_zeros() + 1;
    j.min(t)
}

/// `1.2897 * 2^(mean(j - 1))`.
pub fn lof_estimate(first_empty: &[u32]) -> Result<f64> {
    if first_empty.is_empty() {
        return Err(Error::EmptyInput("first-empty slot list"));
    }
    let exponent =
        first_empty.iter().map(|&j| (j - 1) as f64).sum::<f64>() / first_empty.len() as f64;
    Ok(LOF_SCALE * exponent.exp2())
}

/// Rough estimate from a batch of LoF trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughEstimate {
    pub estimate: f64,
    pub first_empty: Vec<u32>,
    pub slots: u64,
}

/// Phase 1 of SRC_S: `m_prime` LoF trials of `t` slots for one type.
pub fn srcs_phase1(
    n: u64,
    t: u32,
    m_prime: u32,
    streams: &Streams,
    type_index: usize,
) -> Result<RoughEstimate> {
    if m_prime == 0 {
        return Err(Error::config("m_prime", "must be at least 1"));
    }
    let first_empty: Vec<u32> = (0..m_prime)
        .map(|m| lof_trial(n, t, &mut streams.stream(type_index, Purpose::Trial(m))))
        .collect();
    Ok(RoughEstimate {
        estimate: lof_estimate(&first_empty)?,
        first_empty,
        slots: m_prime as u64 * t as u64,
    })
}

/// One balls-and-bins trial: `ell` slots, participation probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBTrialPlan {
    pub ell: u64,
    pub p: f64,
}

impl BBTrialPlan {
    pub fn from_rough(ell: u64, rough: f64) -> Self {
        BBTrialPlan {
            ell,
            p: crate::config::participation(ell, rough),
        }
    }
}

/// One node's balls-and-bins draw. Both the participation uniform and the
/// slot index are always drawn, so every scheme consumes the stream alike.
pub(crate) fn bb_draw<R: Rng + ?Sized>(rng: &mut R, p: f64, ell: u64) -> Option<u64> {
    let u: f64 = rng.gen();
    let slot = rng.gen_range(0..ell);
    (u < p).then_some(slot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BBTrial {
    /// Number of empty slots.
    pub empty: u64,
    /// Transmitters per slot.
    pub occupancy: Vec<u32>,
    /// Slot chosen by each node, `None` for non-participants.
    pub choices: Vec<Option<u64>>,
}

impl BBTrial {
    pub fn participants(&self) -> u64 {
        self.choices.iter().filter(|c| c.is_some()).count() as u64
    }
}

pub fn bb_trial<R: Rng + ?Sized>(n: u64, plan: BBTrialPlan, rng: &mut R) -> BBTrial {
    assert!(plan.ell >= 1, "ell must be at least 1");
    let mut occupancy = vec![0u32; plan.ell as usize];
    let choices: Vec<Option<u64>> = (0..n).map(|_| bb_draw(rng, plan.p, plan.ell)).collect();
    for &slot in choices.iter().flatten() {
        occupancy[slot as usize] += 1;
    }
    let empty = occupancy.iter().filter(|&&c| c == 0).count() as u64;
    BBTrial {
        empty,
        occupancy,
        choices,
    }
}

/// `ln(z / ell) / ln(1 - p / ell)`.
pub fn srcs_final_estimate(empty: u64, ell: u64, p: f64) -> Result<f64> {
    if empty == 0 {
        return Err(Error::AllSlotsBusy { ell });
    }
    if empty >= ell {
        return Ok(0.0);
    }
    let ell_f = ell as f64;
    Ok((empty as f64 / ell_f).ln() / (1.0 - p / ell_f).ln())
}

/// Final estimate, substituting half an empty slot when every slot was busy.
/// The flag reports whether the substitution happened.
pub fn final_estimate_or_fallback(empty: u64, ell: u64, p: f64) -> (f64, bool) {
    match srcs_final_estimate(empty, ell, p) {
        Ok(v) => (v, false),
        Err(_) => {
            let ell_f = ell as f64;
            ((0.5 / ell_f).ln() / (1.0 - p / ell_f).ln(), true)
        }
    }
}

/// Outcome of a balls-and-bins phase covering every type.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Outcome {
    pub empty: Vec<u64>,
    pub participation: Vec<f64>,
    pub ledger: SlotLedger,
    pub energy: EnergyLedger,
}

impl Phase2Outcome {
    pub fn estimates(&self, ell: u64) -> (Vec<f64>, Vec<bool>) {
        self.empty
            .iter()
            .zip(&self.participation)
            .map(|(&z, &p)| final_estimate_or_fallback(z, ell, p))
            .unzip()
    }
}

/// One balls-and-bins trial per type, run back to back (`T * ell` slots).
/// Nodes sleep during the other types' trials.
pub fn t_rep_bb(
    population: &PopulationSpec,
    rough: &[f64],
    config: &ProtocolConfig,
    streams: &Streams,
) -> Phase2Outcome {
    let types = population.types();
    let ell = config.ell;
    let frame = types as u64 * ell;
    let mut energy = EnergyLedger::empty(population.active(), frame);
    let offsets = EnergyLedger::type_offsets(population.active());
    let mut empty = Vec::with_capacity(types);
    let mut participation = Vec::with_capacity(types);
    for b in 0..types {
        let plan = BBTrialPlan::from_rough(ell, rough[b]);
        let trial = bb_trial(
            population.active_count(b),
            plan,
            &mut streams.stream(b, Purpose::Phase2),
        );
        for (i, choice) in trial.choices.iter().enumerate() {
            let node = &mut energy.nodes[offsets[b] + i];
            node.tx = choice.is_some() as u64;
            node.sleep = frame - ell;
        }
        empty.push(trial.empty);
        participation.push(plan.p);
    }
    energy.finish(&config.energy);
    Phase2Outcome {
        empty,
        participation,
        ledger: SlotLedger::new(frame, 0, 0, 0, 0),
        energy,
    }
}

/// Full SRC_S for one type.
#[derive(Debug, Clone, PartialEq)]
pub struct SrcsRun {
    pub rough: RoughEstimate,
    pub plan: BBTrialPlan,
    pub trial: BBTrial,
    pub estimate: f64,
    pub saturated: bool,
}

pub fn srcs(
    n: u64,
    t: u32,
    config: &ProtocolConfig,
    streams: &Streams,
    type_index: usize,
) -> Result<SrcsRun> {
    let rough = srcs_phase1(n, t, config.m_prime, streams, type_index)?;
    let plan = BBTrialPlan::from_rough(config.ell, rough.estimate);
    let trial = bb_trial(n, plan, &mut streams.stream(type_index, Purpose::Phase2));
    let (estimate, saturated) = final_estimate_or_fallback(trial.empty, plan.ell, plan.p);
    Ok(SrcsRun {
        rough,
        plan,
        trial,
        estimate,
        saturated,
    })
}

/// SRC_S run once per type, one after another. Each type uses trials of
/// `ceil(log2 n_all)` slots for its own manufactured count, and a one-slot
/// broadcast of its rough estimate precedes its balls-and-bins trial.
pub fn t_repetitions_srcs(
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<EstimateReport> {
    let types = population.types();
    let offsets = EnergyLedger::type_offsets(population.active());
    let runs: Vec<(u32, SrcsRun)> = (0..types)
        .map(|b| {
            let t = blocks_for(population.manufactured()[b]);
            srcs(population.active_count(b), t, config, streams, b).map(|r| (t, r))
        })
        .collect::<Result<_>>()?;

    let phase1_slots: u64 = runs.iter().map(|(_, r)| r.rough.slots).sum();
    let phase2 = SlotLedger::new(types as u64 * config.ell, 0, 0, 0, 0);
    let ledger = SlotLedger::new(phase1_slots, 0, 0, 0, types as u64) + phase2;

    let mut energy = EnergyLedger::empty(population.active(), ledger.total);
    for (b, (_, run)) in runs.iter().enumerate() {
        let own = run.rough.slots + 1 + config.ell;
        for (i, choice) in run.trial.choices.iter().enumerate() {
            let node = &mut energy.nodes[offsets[b] + i];
            node.tx = config.m_prime as u64 + choice.is_some() as u64;
            node.rx = 1;
            node.sleep = ledger.total - own;
        }
    }
    energy.finish(&config.energy);

    Ok(EstimateReport {
        rough: runs.iter().map(|(_, r)| r.rough.estimate).collect(),
        estimates: runs.iter().map(|(_, r)| r.estimate).collect(),
        phase2_method: None,
        ledger,
        phase2_ledger: phase2,
        energy,
        saturated: runs.iter().map(|(_, r)| r.saturated).collect(),
    })
}

/// Expected per-node energy of a lone balls-and-bins trial for one type.
pub fn expected_trial_energy(p: f64, ell: u64, costs: &EnergyCosts) -> f64 {
    p * costs.transmit + (ell as f64 - p) * costs.idle
}
