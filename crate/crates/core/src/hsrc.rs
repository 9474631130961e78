//! The two-phase heterogeneous estimators and the repeated-trial baselines.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{choose_phase2_2ss, choose_phase2_3ss};
use crate::config::{ceil_div, ProtocolConfig};
use crate::error::{Error, Result};
use crate::frame::TrialOutcome;
use crate::homogeneous::{lof_estimate, t_rep_bb, t_repetitions_srcs, Phase2Outcome};
use crate::ledger::{EnergyLedger, EstimateReport, SlotLedger};
use crate::model::{Phase2Method, PopulationSpec};
use crate::rng::Streams;
use crate::three_stage::{run_3ss_bb, run_3ss_trial};
use crate::two_stage::{run_2ss_bb, run_2ss_trial};

/// Which multi-type trial the estimator is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// 3-SS trials, 3-SS-BB or T-Rep-BB afterwards.
    Hsrc1,
    /// 2-SS trials, 2-SS-BB or T-Rep-BB afterwards.
    Hsrc2,
}

impl Variant {
    fn trial(
        self,
        population: &PopulationSpec,
        config: &ProtocolConfig,
        streams: &Streams,
        index: u32,
    ) -> Result<TrialOutcome> {
        match self {
            Variant::Hsrc1 => run_3ss_trial(population, config, streams, index),
            Variant::Hsrc2 => run_2ss_trial(population, config, streams, index),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Hsrc1 => "HSRC-1",
            Variant::Hsrc2 => "HSRC-2",
        })
    }
}

/// Schemes the estimators are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    ThreeStageRepeated,
    TwoStageRepeated,
    TxSrcs,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::ThreeStageRepeated => "3SS",
            Baseline::TwoStageRepeated => "2SS",
            Baseline::TxSrcs => "TxSRCS",
        })
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "3ss" | "3ss-repeated" => Ok(Baseline::ThreeStageRepeated),
            "2ss" | "2ss-repeated" => Ok(Baseline::TwoStageRepeated),
            "txsrcs" | "t-srcs" => Ok(Baseline::TxSrcs),
            _ => Err(Error::config("scheme", format!("unknown baseline `{s}`"))),
        }
    }
}

/// Phase-1 result: trials run back to back.
struct TrialBatch {
    first_vacant: Vec<Vec<u32>>,
    ledger: SlotLedger,
    energy: EnergyLedger,
}

fn run_trials(
    variant: Variant,
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
    count: u32,
) -> Result<TrialBatch> {
    if count == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let types = population.types();
    let mut first_vacant = vec![Vec::with_capacity(count as usize); types];
    let mut ledger = SlotLedger::default();
    let mut energy = EnergyLedger::empty(population.active(), 0);
    for m in 0..count {
        let trial = variant.trial(population, config, streams, m)?;
        for (b, &j) in trial.first_vacant.iter().enumerate() {
            first_vacant[b].push(j);
        }
        ledger += trial.stage.ledger;
        energy.extend_phase(&trial.stage.energy);
    }
    Ok(TrialBatch {
        first_vacant,
        ledger,
        energy,
    })
}

fn lof_estimates(first_vacant: &[Vec<u32>]) -> Result<Vec<f64>> {
    first_vacant.iter().map(|j| lof_estimate(j)).collect()
}

/// Slots needed to announce every rough estimate, each an exponent sum of
/// `blocks` bits.
pub fn boundary_slots(types: usize, config: &ProtocolConfig) -> u64 {
    ceil_div(types as u64 * config.blocks as u64, config.slot_width)
}

/// The phase-2 method the estimator would pick for these rough estimates.
pub fn choose_phase2(
    variant: Variant,
    rough: &[f64],
    config: &ProtocolConfig,
) -> Result<Phase2Method> {
    match variant {
        Variant::Hsrc1 => Ok(choose_phase2_3ss(rough, config)),
        Variant::Hsrc2 => choose_phase2_2ss(rough, config),
    }
}

/// Phase 2 alone, given rough estimates.
pub fn run_phase2(
    variant: Variant,
    method: Phase2Method,
    population: &PopulationSpec,
    rough: &[f64],
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<Phase2Outcome> {
    Ok(match (method, variant) {
        (Phase2Method::TRepBB, _) => t_rep_bb(population, rough, config, streams),
        (Phase2Method::SSBB, Variant::Hsrc1) => {
            run_3ss_bb(population, rough, config, streams)?.into_phase2()
        }
        (Phase2Method::SSBB, Variant::Hsrc2) => {
            run_2ss_bb(population, rough, config, streams)?.into_phase2()
        }
    })
}

/// One frame of HSRC-1 or HSRC-2. `phase2_override` forces the phase-2 method.
pub fn run_hsrc(
    variant: Variant,
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
    phase2_override: Option<Phase2Method>,
) -> Result<EstimateReport> {
    let types = population.types();
    let batch = run_trials(variant, population, config, streams, config.m_prime)?;
    let rough = lof_estimates(&batch.first_vacant)?;

    // Every node listens to the rough-estimate announcement.
    let boundary = boundary_slots(types, config);
    let mut announce = EnergyLedger::empty(population.active(), boundary);
    for node in &mut announce.nodes {
        node.rx = boundary;
    }
    announce.finish(&config.energy);

    let method = match phase2_override {
        Some(m) => m,
        None => choose_phase2(variant, &rough, config)?,
    };
    let phase2 = run_phase2(variant, method, population, &rough, config, streams)?;
    let (estimates, saturated) = phase2.estimates(config.ell);

    let ledger = batch.ledger + SlotLedger::overhead_only(boundary) + phase2.ledger;
    let mut energy = batch.energy;
    energy.extend_phase(&announce);
    energy.extend_phase(&phase2.energy);
    Ok(EstimateReport {
        rough,
        estimates,
        phase2_method: Some(method),
        ledger,
        phase2_ledger: phase2.ledger,
        energy,
        saturated,
    })
}

/// One frame of a baseline. The repeated schemes run `config.m_lof` trials
/// and estimate from them alone.
pub fn run_baseline(
    scheme: Baseline,
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<EstimateReport> {
    let variant = match scheme {
        Baseline::TxSrcs => return t_repetitions_srcs(population, config, streams),
        Baseline::ThreeStageRepeated => Variant::Hsrc1,
        Baseline::TwoStageRepeated => Variant::Hsrc2,
    };
    let batch = run_trials(variant, population, config, streams, config.m_lof)?;
    let estimates = lof_estimates(&batch.first_vacant)?;
    Ok(EstimateReport {
        rough: estimates.clone(),
        estimates,
        phase2_method: None,
        ledger: batch.ledger,
        phase2_ledger: SlotLedger::default(),
        energy: batch.energy,
        saturated: vec![false; population.types()],
    })
}
