//! Slot and energy bookkeeping, presence sets and the estimate report.

use std::ops::{Add, AddAssign};

use crate::config::EnergyCosts;
use crate::model::Phase2Method;

/// Slot counts of one run, split by stage.
///
/// `bp` holds broadcast packets that belong to the protocol itself;
/// `overhead` holds the extra control packets this simulator needs (phase
/// boundary broadcasts, 2-SS plan announcements). `total` counts both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SlotLedger {
    pub stage1: u64,
    pub stage2: u64,
    pub stage3: u64,
    pub bp: u64,
    pub overhead: u64,
    pub total: u64,
}

impl SlotLedger {
    pub fn new(stage1: u64, stage2: u64, stage3: u64, bp: u64, overhead: u64) -> Self {
        SlotLedger {
            stage1,
            stage2,
            stage3,
            bp,
            overhead,
            total: stage1 + stage2 + stage3 + bp + overhead,
        }
    }

    pub fn overhead_only(overhead: u64) -> Self {
        Self::new(0, 0, 0, 0, overhead)
    }

    /// Total without the simulator-only overhead.
    pub fn protocol_total(&self) -> u64 {
        self.total - self.overhead
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.stage1 + self.stage2 + self.stage3 + self.bp + self.overhead
    }
}

impl Add for SlotLedger {
    type Output = SlotLedger;

    fn add(self, o: SlotLedger) -> SlotLedger {
        SlotLedger::new(
            self.stage1 + o.stage1,
            self.stage2 + o.stage2,
            self.stage3 + o.stage3,
            self.bp + o.bp,
            self.overhead + o.overhead,
        )
    }
}

impl AddAssign for SlotLedger {
    fn add_assign(&mut self, o: SlotLedger) {
        *self = *self + o;
    }
}

impl std::iter::Sum for SlotLedger {
    fn sum<I: Iterator<Item = SlotLedger>>(iter: I) -> Self {
        iter.fold(SlotLedger::default(), |a, b| a + b)
    }
}

/// Radio-state slot counts of one active node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeEnergy {
    pub type_index: usize,
    pub tx: u64,
    pub rx: u64,
    pub idle: u64,
    /// Slots during which the node's radio is off and spends nothing.
    pub sleep: u64,
    pub energy: f64,
}

impl NodeEnergy {
    pub fn slots(&self) -> u64 {
        self.tx + self.rx + self.idle + self.sleep
    }
}

/// Per-node energy records for every active node, ordered by type then node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub frame_slots: u64,
    pub nodes: Vec<NodeEnergy>,
}

impl EnergyLedger {
    /// Records for a phase of `frame_slots` slots, with no activity yet.
    pub fn empty(active: &[u64], frame_slots: u64) -> Self {
        let nodes = active
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| {
                (0..n).map(move |_| NodeEnergy {
                    type_index: b,
                    ..Default::default()
                })
            })
            .collect();
        EnergyLedger { frame_slots, nodes }
    }

    /// Offset of the first node of each type in `nodes`.
    pub fn type_offsets(active: &[u64]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(active.len());
        let mut acc = 0usize;
        for &n in active {
            offsets.push(acc);
            acc += n as usize;
        }
        offsets
    }

    /// Fill idle slots and energies once tx, rx and sleep are known.
    pub fn finish(&mut self, costs: &EnergyCosts) {
        for node in &mut self.nodes {
            let busy = node.tx + node.rx + node.sleep;
            debug_assert!(busy <= self.frame_slots, "node busy beyond frame");
            node.idle = self.frame_slots.saturating_sub(busy);
            node.energy = costs.energy(node.tx as f64, node.rx as f64, node.idle as f64);
        }
    }

    /// Append a later phase over the same node set.
    pub fn extend_phase(&mut self, later: &EnergyLedger) {
        assert_eq!(self.nodes.len(), later.nodes.len(), "node sets differ");
        self.frame_slots += later.frame_slots;
        for (a, b) in self.nodes.iter_mut().zip(&later.nodes) {
            a.tx += b.tx;
            a.rx += b.rx;
            a.idle += b.idle;
            a.sleep += b.sleep;
            a.energy += b.energy;
        }
    }

    pub fn is_consistent(&self, costs: &EnergyCosts) -> bool {
        self.nodes.iter().all(|n| {
            let e = costs.energy(n.tx as f64, n.rx as f64, n.idle as f64);
            n.slots() == self.frame_slots && (e - n.energy).abs() <= 1e-9 * e.abs().max(1.0)
        })
    }

    /// Mean energy per node of each type (0 for types with no active nodes).
    pub fn mean_per_type(&self, types: usize) -> Vec<f64> {
        let mut sum = vec![0.0; types];
        let mut count = vec![0u64; types];
        for n in &self.nodes {
            sum[n.type_index] += n.energy;
            count[n.type_index] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }
}

/// Per-type sets of stage-1 blocks that held at least one node of that type,
/// plus the flagged-block bitmap announced after stage 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceSets {
    pub present: Vec<Vec<bool>>,
    pub flagged: Vec<bool>,
}

impl PresenceSets {
    pub fn new(types: usize, blocks: usize) -> Self {
        PresenceSets {
            present: vec![vec![false; blocks]; types],
            flagged: vec![false; blocks],
        }
    }

    pub fn blocks(&self) -> usize {
        self.flagged.len()
    }

    pub fn occupied(&self, type_index: usize) -> usize {
        self.present[type_index].iter().filter(|&&p| p).count()
    }

    /// 1-based index of the first block without the type, or the block count if none.
    pub fn first_vacant(&self, type_index: usize) -> u32 {
        let row = &self.present[type_index];
        row.iter()
            .position(|&p| !p)
            .map(|i| i as u32 + 1)
            .unwrap_or(row.len() as u32)
    }
}

/// Outcome of one full estimation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Phase-1 estimates, one per type.
    pub rough: Vec<f64>,
    /// Final estimates, one per type.
    pub estimates: Vec<f64>,
    /// `None` for schemes with no balls-and-bins phase.
    pub phase2_method: Option<Phase2Method>,
    pub ledger: SlotLedger,
    pub phase2_ledger: SlotLedger,
    pub energy: EnergyLedger,
    /// Types whose estimate used the all-slots-busy fallback.
    pub saturated: Vec<bool>,
}

impl EstimateReport {
    pub fn types(&self) -> usize {
        self.estimates.len()
    }

    /// Per type, whether `|estimate - truth| <= epsilon * truth`.
    pub fn within(&self, truth: &[u64], epsilon: f64) -> Vec<bool> {
        self.estimates
            .iter()
            .zip(truth)
            .map(|(&e, &n)| (e - n as f64).abs() <= epsilon * n as f64 + 1e-9)
            .collect()
    }
}
