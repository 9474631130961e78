//! Channel-level domain types: symbols, slot and block outcomes, symbol
//! matrices, and the per-frame population.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// One of the two distinguishable symbols a node can transmit in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Alpha,
    Beta,
}

/// What the base station observes in a single slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SlotOutcome {
    #[default]
    Empty,
    SingleAlpha,
    SingleBeta,
    Collision,
}

impl SlotOutcome {
    pub fn single(symbol: Symbol) -> Self {
        match symbol {
            Symbol::Alpha => SlotOutcome::SingleAlpha,
            Symbol::Beta => SlotOutcome::SingleBeta,
        }
    }

    /// Outcome after one more transmitter joins the slot.
    pub fn with(self, symbol: Symbol) -> Self {
        match self {
            SlotOutcome::Empty => SlotOutcome::single(symbol),
            _ => SlotOutcome::Collision,
        }
    }

    /// Outcome after `count` transmitters of `symbol` join the slot.
    pub fn with_many(self, symbol: Symbol, count: u32) -> Self {
        match count {
            0 => self,
            1 => self.with(symbol),
            _ => SlotOutcome::Collision,
        }
    }

    pub fn is_empty(self) -> bool {
        self == SlotOutcome::Empty
    }

    pub fn is_collision(self) -> bool {
        self == SlotOutcome::Collision
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            SlotOutcome::Empty => 0,
            SlotOutcome::SingleAlpha => 1,
            SlotOutcome::SingleBeta => 2,
            SlotOutcome::Collision => 3,
        }
    }
}

impl fmt::Display for SlotOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SlotOutcome::Empty => "E",
            SlotOutcome::SingleAlpha => "a",
            SlotOutcome::SingleBeta => "b",
            SlotOutcome::Collision => "C",
        };
        f.write_str(s)
    }
}

/// Resolve the multiset of symbols transmitted in one slot.
pub fn resolve_slot(symbols: &[Symbol]) -> SlotOutcome {
    symbols
        .iter()
        .fold(SlotOutcome::Empty, |acc, &s| acc.with(s))
}

/// Ordered slot outcomes of one stage-1 block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockOutcome(pub Vec<SlotOutcome>);

impl BlockOutcome {
    pub fn slots(&self) -> &[SlotOutcome] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_collision(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|s| s.is_collision())
    }

    /// Compact key, two bits per slot. Only valid for blocks of at most 32 slots.
    pub(crate) fn key(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, s)| acc | (s.code() << (2 * i)))
    }
}

impl fmt::Display for BlockOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Per-type presence inference for one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Absent,
    Present,
    Ambiguous,
}

/// Phase-2 approach of the composite estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase2Method {
    /// One balls-and-bins trial per type, `T * ell` slots.
    TRepBB,
    /// All types multiplexed in one `ell`-block run of the stage scheme.
    SSBB,
}

impl fmt::Display for Phase2Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase2Method::TRepBB => f.write_str("TRepBB"),
            Phase2Method::SSBB => f.write_str("SSBB"),
        }
    }
}

/// Which slot-encoding family a matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    ThreeStage,
    TwoStage,
}

/// Symbol each type transmits in each slot of a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolMatrix {
    kind: MatrixKind,
    rows: Vec<Vec<Option<Symbol>>>,
}

impl SymbolMatrix {
    /// Type 1 sends alpha in all `types - 1` slots; type `b >= 2` sends beta in slot `b - 1`.
    pub fn three_stage(types: usize) -> Self {
        assert!(types >= 2, "need at least two types");
        let width = types - 1;
        let mut rows = Vec::with_capacity(types);
        rows.push(vec![Some(Symbol::Alpha); width]);
        for b in 1..types {
            let mut row = vec![None; width];
            row[b - 1] = Some(Symbol::Beta);
            rows.push(row);
        }
        SymbolMatrix {
            kind: MatrixKind::ThreeStage,
            rows,
        }
    }

    /// Alpha-prefix / beta-suffix encoding in `floor(types / 2)` slots.
    /// Falls back to the three-stage matrix for two or three types.
    pub fn two_stage(types: usize) -> Self {
        assert!(types >= 2, "need at least two types");
        if types <= 3 {
            return Self::three_stage(types);
        }
        let width = types / 2;
        let mut rows = Vec::with_capacity(types);
        for k in 1..=width {
            let mut row = vec![None; width];
            row[..k].fill(Some(Symbol::Alpha));
            rows.push(row);
        }
        for k in 1..=width {
            let mut row = vec![None; width];
            row[width - k..].fill(Some(Symbol::Beta));
            rows.push(row);
        }
        if types % 2 == 1 {
            let mut row = vec![None; width];
            row[0] = Some(Symbol::Beta);
            row[width - 1] = Some(Symbol::Alpha);
            rows.push(row);
        }
        SymbolMatrix {
            kind: MatrixKind::TwoStage,
            rows,
        }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn types(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn symbol(&self, type_index: usize, slot: usize) -> Option<Symbol> {
        self.rows[type_index][slot]
    }

    pub fn row(&self, type_index: usize) -> &[Option<Symbol>] {
        &self.rows[type_index]
    }

    /// Slots in which a node of this type transmits.
    pub fn transmissions(&self, type_index: usize) -> u32 {
        self.rows[type_index].iter().filter(|s| s.is_some()).count() as u32
    }

    /// Block outcome produced by the given per-type transmitter counts.
    pub fn outcome(&self, counts: &[u32]) -> BlockOutcome {
        debug_assert_eq!(counts.len(), self.types());
        let slots = (0..self.width())
            .map(|s| {
                self.rows
                    .iter()
                    .zip(counts)
                    .fold(SlotOutcome::Empty, |acc, (row, &c)| match row[s] {
                        Some(sym) => acc.with_many(sym, c),
                        None => acc,
                    })
            })
            .collect();
        BlockOutcome(slots)
    }
}

/// Per-type Bernoulli activation model used to sample active counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityModel {
    /// Nodes of each type present in the network.
    pub nodes_per_type: u64,
    /// Probability that a node is active in the frame.
    pub activation_prob: f64,
}

/// Ground-truth active and manufactured counts per type for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    active: Vec<u64>,
    manufactured: Vec<u64>,
    activity: Option<ActivityModel>,
}

impl PopulationSpec {
    pub fn new(active: Vec<u64>, manufactured: Vec<u64>) -> Result<Self> {
        if active.len() < 2 {
            return Err(Error::InvalidPopulation(format!(
                "need at least 2 types, got {}",
                active.len()
            )));
        }
        if active.len() != manufactured.len() {
            return Err(Error::InvalidPopulation(format!(
                "{} active counts but {} manufactured counts",
                active.len(),
                manufactured.len()
            )));
        }
        if let Some(b) = (0..active.len()).find(|&b| active[b] > manufactured[b]) {
            return Err(Error::InvalidPopulation(format!(
                "type {} has {} active nodes but only {} manufactured",
                b + 1,
                active[b],
                manufactured[b]
            )));
        }
        Ok(PopulationSpec {
            active,
            manufactured,
            activity: None,
        })
    }

    /// Every type shares the same manufactured count.
    pub fn with_common_total(active: Vec<u64>, manufactured: u64) -> Result<Self> {
        let m = vec![manufactured; active.len()];
        Self::new(active, m)
    }

    /// Draw each type's active count from Binomial(D, q).
    pub fn sample<R: Rng + ?Sized>(
        types: usize,
        model: ActivityModel,
        manufactured: u64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&model.activation_prob) {
            return Err(Error::InvalidPopulation(format!(
                "activation probability {} outside [0, 1]",
                model.activation_prob
            )));
        }
        if manufactured < model.nodes_per_type {
            return Err(Error::InvalidPopulation(format!(
                "{} nodes per type exceed manufactured total {}",
                model.nodes_per_type, manufactured
            )));
        }
        let active = (0..types)
            .map(|_| {
                (0..model.nodes_per_type)
                    .filter(|_| rng.gen::<f64>() < model.activation_prob)
                    .count() as u64
            })
            .collect();
        let mut spec = Self::with_common_total(active, manufactured)?;
        spec.activity = Some(model);
        Ok(spec)
    }

    pub fn types(&self) -> usize {
        self.active.len()
    }

    pub fn active(&self) -> &[u64] {
        &self.active
    }

    pub fn active_count(&self, type_index: usize) -> u64 {
        self.active[type_index]
    }

    pub fn manufactured(&self) -> &[u64] {
        &self.manufactured
    }

    pub fn activity(&self) -> Option<ActivityModel> {
        self.activity
    }

    pub fn total_active(&self) -> u64 {
        self.active.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn slot_resolution_brute_force() {
        let syms = [Symbol::Alpha, Symbol::Beta];
        assert_eq!(resolve_slot(&[]), SlotOutcome::Empty);
        for &a in &syms {
            assert_eq!(resolve_slot(&[a]), SlotOutcome::single(a));
            for &b in &syms {
                assert_eq!(resolve_slot(&[a, b]), SlotOutcome::Collision);
                for &c in &syms {
                    assert_eq!(resolve_slot(&[a, b, c]), SlotOutcome::Collision);
                    assert_eq!(resolve_slot(&[c, b, a]), resolve_slot(&[a, b, c]));
                }
            }
        }
    }

    #[test]
    fn three_stage_rows() {
        let m = SymbolMatrix::three_stage(4);
        assert_eq!(m.width(), 3);
        assert!(m.row(0).iter().all(|s| *s == Some(Symbol::Alpha)));
        assert_eq!(m.row(2), &[None, Some(Symbol::Beta), None]);
    }

    #[test]
    fn two_stage_rows_for_four_and_five() {
        use Symbol::*;
        let m = SymbolMatrix::two_stage(4);
        assert_eq!(m.width(), 2);
        assert_eq!(m.row(0), &[Some(Alpha), None]);
        assert_eq!(m.row(1), &[Some(Alpha), Some(Alpha)]);
        assert_eq!(m.row(2), &[None, Some(Beta)]);
        assert_eq!(m.row(3), &[Some(Beta), Some(Beta)]);
        let m5 = SymbolMatrix::two_stage(5);
        assert_eq!(m5.types(), 5);
        assert_eq!(m5.row(4), &[Some(Beta), Some(Alpha)]);
    }

    #[test]
    fn two_stage_small_is_three_stage() {
        assert_eq!(
            SymbolMatrix::two_stage(2).row(0),
            SymbolMatrix::three_stage(2).row(0)
        );
        assert_eq!(
            SymbolMatrix::two_stage(3).rows,
            SymbolMatrix::three_stage(3).rows
        );
    }

    #[test]
    fn two_stage_rows_distinct() {
        for t in 2..=16 {
            let m = SymbolMatrix::two_stage(t);
            for a in 0..t {
                assert!(m.transmissions(a) > 0);
                for b in a + 1..t {
                    assert_ne!(m.row(a), m.row(b), "T={t} rows {a},{b}");
                }
            }
        }
    }

    #[test]
    fn outcome_from_counts() {
        let m = SymbolMatrix::three_stage(3);
        assert_eq!(
            m.outcome(&[1, 0, 0]).slots(),
            &[SlotOutcome::SingleAlpha, SlotOutcome::SingleAlpha]
        );
        assert!(m.outcome(&[2, 0, 0]).all_collision());
        assert_eq!(
            m.outcome(&[0, 1, 0]).slots(),
            &[SlotOutcome::SingleBeta, SlotOutcome::Empty]
        );
    }

    #[test]
    fn population_validation() {
        assert!(PopulationSpec::new(vec![1], vec![1]).is_err());
        assert!(PopulationSpec::new(vec![5, 1], vec![4, 4]).is_err());
        assert!(PopulationSpec::new(vec![1, 2], vec![4]).is_err());
        let p = PopulationSpec::new(vec![3, 4], vec![4, 4]).unwrap();
        assert_eq!(p.total_active(), 7);
    }

    #[test]
    fn sampled_counts_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = ActivityModel {
            nodes_per_type: 50,
            activation_prob: 0.3,
        };
        for _ in 0..20 {
            let p = PopulationSpec::sample(4, model, 1000, &mut rng).unwrap();
            assert!(p.active().iter().all(|&n| n <= 50));
        }
    }
}
