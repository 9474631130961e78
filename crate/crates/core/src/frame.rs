//! Stage-1 block choices shared by the multi-type schemes.

use crate::homogeneous::{bb_draw, lof_slot_index};
use crate::ledger::{EnergyLedger, PresenceSets, SlotLedger};
use crate::model::{BlockOutcome, PopulationSpec, SymbolMatrix};
use crate::rng::{Purpose, Streams};

/// How nodes pick their stage-1 block.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage1Mode {
    /// Phase-1 trial `index`: geometric block choice, every node takes part.
    Trial { index: u32 },
    /// Balls-and-bins phase: uniform block choice, type `b` takes part with `participation[b]`.
    BallsAndBins { participation: Vec<f64> },
}

/// Per-node block choices and per-block transmitter counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Draw {
    pub blocks: usize,
    pub types: usize,
    /// Block chosen by each node, grouped by type; `None` for non-participants.
    pub choices: Vec<Vec<Option<u32>>>,
    counts: Vec<u32>,
}

impl Stage1Draw {
    pub fn draw(
        population: &PopulationSpec,
        blocks: u32,
        mode: &Stage1Mode,
        streams: &Streams,
    ) -> Self {
        let choices: Vec<Vec<Option<u32>>> = (0..population.types())
            .map(|b| {
                let n = population.active_count(b);
                match mode {
                    Stage1Mode::Trial { index } => {
                        let mut rng = streams.stream(b, Purpose::Trial(*index));
                        (0..n)
                            .map(|_| Some(lof_slot_index(&mut rng, blocks) - 1))
                            .collect()
                    }
                    Stage1Mode::BallsAndBins { participation } => {
                        let mut rng = streams.stream(b, Purpose::Phase2);
                        (0..n)
                            .map(|_| {
                                bb_draw(&mut rng, participation[b], blocks as u64).map(|h| h as u32)
                            })
                            .collect()
                    }
                }
            })
            .collect();
        Self::from_choices(choices, blocks)
    }

    /// Build counts from explicit per-node block choices.
    pub fn from_choices(choices: Vec<Vec<Option<u32>>>, blocks: u32) -> Self {
        let types = choices.len();
        let n_blocks = blocks as usize;
        let mut counts = vec![0u32; n_blocks * types];
        for (b, picks) in choices.iter().enumerate() {
            for &h in picks.iter().flatten() {
                counts[h as usize * types + b] += 1;
            }
        }
        Stage1Draw {
            blocks: n_blocks,
            types,
            choices,
            counts,
        }
    }

    /// Transmitters of each type in block `h`.
    pub fn counts(&self, h: usize) -> &[u32] {
        &self.counts[h * self.types..(h + 1) * self.types]
    }

    pub fn outcome(&self, h: usize, matrix: &SymbolMatrix) -> BlockOutcome {
        matrix.outcome(self.counts(h))
    }

    /// Ground-truth presence sets.
    pub fn truth(&self) -> PresenceSets {
        let mut p = PresenceSets::new(self.types, self.blocks);
        for h in 0..self.blocks {
            for (b, &c) in self.counts(h).iter().enumerate() {
                p.present[b][h] = c > 0;
            }
        }
        p
    }
}

/// Result of one multi-type stage run (a phase-1 trial or a phase-2 balls-and-bins run).
#[derive(Debug, Clone, PartialEq)]
pub struct StageRun {
    /// Presence sets recovered by the base station.
    pub presence: PresenceSets,
    /// Presence sets implied by the node draws.
    pub truth: PresenceSets,
    /// Blocks sent to stage 2, ascending.
    pub flagged: Vec<u32>,
    /// Blocks that needed further slots after the first follow-up slot (3-SS R-list),
    /// or that needed group splitting (2-SS).
    pub escalated: Vec<u32>,
    pub ledger: SlotLedger,
    pub energy: EnergyLedger,
}

impl StageRun {
    pub fn is_sound(&self) -> bool {
        self.presence.present == self.truth.present
    }
}

/// Outcome of a phase-1 trial: first vacant block per type plus the run details.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub first_vacant: Vec<u32>,
    pub stage: StageRun,
}

impl TrialOutcome {
    pub(crate) fn from_stage(stage: StageRun) -> Self {
        let first_vacant = (0..stage.presence.present.len())
            .map(|b| stage.presence.first_vacant(b))
            .collect();
        TrialOutcome {
            first_vacant,
            stage,
        }
    }
}

/// Outcome of a multiplexed balls-and-bins phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SsBbRun {
    pub participation: Vec<f64>,
    pub empty: Vec<u64>,
    pub stage: StageRun,
}

impl SsBbRun {
    pub(crate) fn from_stage(participation: Vec<f64>, stage: StageRun) -> Self {
        let blocks = stage.presence.blocks() as u64;
        let empty = (0..participation.len())
            .map(|b| blocks - stage.presence.occupied(b) as u64)
            .collect();
        SsBbRun {
            participation,
            empty,
            stage,
        }
    }

    pub fn into_phase2(self) -> crate::homogeneous::Phase2Outcome {
        crate::homogeneous::Phase2Outcome {
            empty: self.empty,
            participation: self.participation,
            ledger: self.stage.ledger,
            energy: self.stage.energy,
        }
    }
}
