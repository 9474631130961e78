//! The 3-stage scheme and its balls-and-bins variant.
//!
//! Stage 1 multiplexes all types into blocks of `T - 1` slots. Blocks where
//! every slot collides are flagged; stage 2 gives each flagged block one slot
//! for type-1 nodes, and stage 3 gives each block whose stage-2 slot collided
//! one dedicated slot per remaining type.

use crate::config::{ceil_div, ProtocolConfig};
use crate::decode::decode_block;
use crate::error::{Error, Result};
use crate::frame::{SsBbRun, Stage1Draw, Stage1Mode, StageRun, TrialOutcome};
use crate::ledger::{EnergyLedger, PresenceSets, SlotLedger};
use crate::model::{BlockOutcome, PopulationSpec, SlotOutcome, Symbol, SymbolMatrix, Verdict};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Result3SS {
    pub draw: Stage1Draw,
    pub outcomes: Vec<BlockOutcome>,
    /// Blocks whose every slot collided, ascending.
    pub flagged: Vec<u32>,
}

pub fn run_3ss_stage1(
    population: &PopulationSpec,
    blocks: u32,
    mode: &Stage1Mode,
    streams: &Streams,
) -> Stage1Result3SS {
    let matrix = SymbolMatrix::three_stage(population.types());
    let draw = Stage1Draw::draw(population, blocks, mode, streams);
    let outcomes: Vec<BlockOutcome> = (0..draw.blocks).map(|h| draw.outcome(h, &matrix)).collect();
    let flagged = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.all_collision())
        .map(|(h, _)| h as u32)
        .collect();
    Stage1Result3SS {
        draw,
        outcomes,
        flagged,
    }
}

pub fn decode_block_3ss(outcome: &BlockOutcome, types: usize) -> Result<Vec<Verdict>> {
    decode_block(outcome, &SymbolMatrix::three_stage(types))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowUp3SS {
    pub presence: PresenceSets,
    pub ledger: SlotLedger,
    /// Stage-2 outcome for each flagged block, in flagged order.
    pub stage2: Vec<SlotOutcome>,
    /// Flagged blocks whose stage-2 slot collided, ascending.
    pub r_list: Vec<u32>,
}

/// Stages 2 and 3, and the decoding of every block.
pub fn run_3ss_followup(stage1: &Stage1Result3SS, slot_width: u32) -> Result<FollowUp3SS> {
    let types = stage1.draw.types;
    let blocks = stage1.draw.blocks;
    let mut presence = PresenceSets::new(types, blocks);
    for (h, outcome) in stage1.outcomes.iter().enumerate() {
        if outcome.all_collision() {
            presence.flagged[h] = true;
            continue;
        }
        let verdicts = decode_block_3ss(outcome, types)?;
        for (b, v) in verdicts.iter().enumerate() {
            presence.present[b][h] = match v {
                Verdict::Present => true,
                Verdict::Absent => false,
                Verdict::Ambiguous => {
                    return Err(Error::InconsistentOutcome(format!(
                        "unflagged block {h} {outcome} left type {} ambiguous",
                        b + 1
                    )))
                }
            };
        }
    }

    let mut stage2 = Vec::with_capacity(stage1.flagged.len());
    let mut r_list = Vec::new();
    for &h in &stage1.flagged {
        let counts = stage1.draw.counts(h as usize);
        let slot = SlotOutcome::Empty.with_many(Symbol::Alpha, counts[0]);
        stage2.push(slot);
        let h = h as usize;
        match slot {
            SlotOutcome::Empty => {
                presence.present[0][h] = false;
                for b in 1..types {
                    presence.present[b][h] = true;
                }
            }
            SlotOutcome::SingleAlpha => {
                for b in 0..types {
                    presence.present[b][h] = true;
                }
            }
            _ => {
                presence.present[0][h] = true;
                r_list.push(h as u32);
                for b in 1..types {
                    let dedicated = SlotOutcome::Empty.with_many(Symbol::Beta, counts[b]);
                    presence.present[b][h] = !dedicated.is_empty();
                }
            }
        }
    }

    let ledger = SlotLedger::new(
        (types as u64 - 1) * blocks as u64,
        stage1.flagged.len() as u64,
        (types as u64 - 1) * r_list.len() as u64,
        ceil_div(blocks as u64, slot_width) + ceil_div(stage1.flagged.len() as u64, slot_width),
        0,
    );
    Ok(FollowUp3SS {
        presence,
        ledger,
        stage2,
        r_list,
    })
}

fn run_3ss(
    population: &PopulationSpec,
    blocks: u32,
    mode: &Stage1Mode,
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<StageRun> {
    let stage1 = run_3ss_stage1(population, blocks, mode, streams);
    let follow = run_3ss_followup(&stage1, config.slot_width)?;
    let types = population.types();
    let bp1 = ceil_div(blocks as u64, config.slot_width);
    let mut in_r = vec![false; blocks as usize];
    for &h in &follow.r_list {
        in_r[h as usize] = true;
    }
    let mut energy = EnergyLedger::empty(population.active(), follow.ledger.total);
    let mut node = 0usize;
    for (b, picks) in stage1.draw.choices.iter().enumerate() {
        for pick in picks {
            if let Some(h) = pick {
                let h = *h as usize;
                let flagged = follow.presence.flagged[h] as u64;
                let rec = &mut energy.nodes[node];
                if b == 0 {
                    rec.tx = (types as u64 - 1) + flagged;
                    rec.rx = bp1;
                } else {
                    rec.tx = 1 + in_r[h] as u64;
                    rec.rx = bp1 + flagged;
                }
            }
            node += 1;
        }
    }
    energy.finish(&config.energy);
    Ok(StageRun {
        truth: stage1.draw.truth(),
        presence: follow.presence,
        flagged: stage1.flagged,
        escalated: follow.r_list,
        ledger: follow.ledger,
        energy,
    })
}

/// One 3-SS trial over `config.blocks` geometrically chosen blocks.
pub fn run_3ss_trial(
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
    trial_index: u32,
) -> Result<TrialOutcome> {
    let stage = run_3ss(
        population,
        config.blocks,
        &Stage1Mode::Trial { index: trial_index },
        config,
        streams,
    )?;
    Ok(TrialOutcome::from_stage(stage))
}

/// 3-SS-BB: `ell` uniformly chosen blocks, type `b` taking part with `min(1, 1.6 ell / rough[b])`.
pub fn run_3ss_bb(
    population: &PopulationSpec,
    rough: &[f64],
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<SsBbRun> {
    let participation: Vec<f64> = rough.iter().map(|&r| config.participation(r)).collect();
    let blocks = u32::try_from(config.ell).map_err(|_| Error::config("ell", "too large"))?;
    let stage = run_3ss(
        population,
        blocks,
        &Stage1Mode::BallsAndBins {
            participation: participation.clone(),
        },
        config,
        streams,
    )?;
    Ok(SsBbRun::from_stage(participation, stage))
}
