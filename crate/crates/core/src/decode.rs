//! Consistency decoding of a block outcome against a symbol matrix.
//!
//! A scenario assigns each type a capped transmitter count in {0, 1, 2+}. A
//! scenario is consistent when it reproduces the observed outcome slot by
//! slot. A type is Present (Absent) when every consistent scenario has it
//! present (absent), and Ambiguous when they disagree.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{BlockOutcome, MatrixKind, SlotOutcome, SymbolMatrix, Verdict};

/// Node budget for scenario enumeration before giving up on exact patterns.
const ENUMERATION_BUDGET: usize = 400_000;

struct Search<'a> {
    matrix: &'a SymbolMatrix,
    observed: &'a [SlotOutcome],
    min: Vec<u32>,
    max: Vec<u32>,
}

impl<'a> Search<'a> {
    fn new(matrix: &'a SymbolMatrix, outcome: &'a BlockOutcome) -> Self {
        let types = matrix.types();
        let mut max = vec![2u32; types];
        for (b, cap) in max.iter_mut().enumerate() {
            for (s, obs) in outcome.slots().iter().enumerate() {
                if matrix.symbol(b, s).is_none() {
                    continue;
                }
                match obs {
                    SlotOutcome::Empty => *cap = 0,
                    SlotOutcome::SingleAlpha | SlotOutcome::SingleBeta => *cap = (*cap).min(1),
                    SlotOutcome::Collision => {}
                }
            }
        }
        Search {
            matrix,
            observed: outcome.slots(),
            min: vec![0; types],
            max,
        }
    }

    /// Whether the partial state after assigning types `..next` can still reach the observation.
    fn viable(&self, state: &[SlotOutcome], next: usize) -> bool {
        let types = self.matrix.types();
        state
            .iter()
            .zip(self.observed)
            .enumerate()
            .all(|(s, (&got, &want))| {
                if got == want {
                    return true;
                }
                match (got, want) {
                    (SlotOutcome::Empty, SlotOutcome::SingleAlpha | SlotOutcome::SingleBeta) => {
                        (next..types).any(|b| {
                            self.max[b] >= 1
                                && self
                                    .matrix
                                    .symbol(b, s)
                                    .is_some_and(|sym| SlotOutcome::single(sym) == want)
                        })
                    }
                    (SlotOutcome::Empty, SlotOutcome::Collision) => {
                        (next..types)
                            .filter(|&b| self.matrix.symbol(b, s).is_some())
                            .map(|b| self.max[b])
                            .sum::<u32>()
                            >= 2
                    }
                    (
                        SlotOutcome::SingleAlpha | SlotOutcome::SingleBeta,
                        SlotOutcome::Collision,
                    ) => (next..types)
                        .any(|b| self.max[b] >= 1 && self.matrix.symbol(b, s).is_some()),
                    _ => false,
                }
            })
    }

    fn apply(&self, state: &[SlotOutcome], b: usize, count: u32) -> Vec<SlotOutcome> {
        state
            .iter()
            .enumerate()
            .map(|(s, &o)| match self.matrix.symbol(b, s) {
                Some(sym) => o.with_many(sym, count),
                None => o,
            })
            .collect()
    }

    fn exists(&self, state: &[SlotOutcome], next: usize) -> bool {
        if next == self.matrix.types() {
            return state == self.observed;
        }
        (self.min[next]..=self.max[next]).any(|c| {
            let s = self.apply(state, next, c);
            self.viable(&s, next + 1) && self.exists(&s, next + 1)
        })
    }

    /// Collect presence bitmasks of every consistent scenario. Returns false if the budget ran out.
    fn collect(
        &self,
        state: &[SlotOutcome],
        next: usize,
        mask: u64,
        out: &mut HashSet<u64>,
        budget: &mut usize,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if next == self.matrix.types() {
            if state == self.observed {
                out.insert(mask);
            }
            return true;
        }
        for c in self.min[next]..=self.max[next] {
            let s = self.apply(state, next, c);
            if !self.viable(&s, next + 1) {
                continue;
            }
            let m = if c > 0 { mask | (1 << next) } else { mask };
            if !self.collect(&s, next + 1, m, out, budget) {
                return false;
            }
        }
        true
    }

    fn start(&self) -> Vec<SlotOutcome> {
        vec![SlotOutcome::Empty; self.observed.len()]
    }
}

/// Whether some scenario with `type_index` forced absent (or present) reproduces `outcome`.
fn feasible_with(
    matrix: &SymbolMatrix,
    outcome: &BlockOutcome,
    type_index: usize,
    present: bool,
) -> bool {
    let mut search = Search::new(matrix, outcome);
    if present {
        search.min[type_index] = 1;
    } else {
        search.max[type_index] = 0;
    }
    if search.min[type_index] > search.max[type_index] {
        return false;
    }
    let start = search.start();
    search.viable(&start, 0) && search.exists(&start, 0)
}

fn decode_uncached(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Result<Vec<Verdict>> {
    if outcome.len() != matrix.width() {
        return Err(Error::InconsistentOutcome(format!(
            "{outcome} has {} slots, matrix has {}",
            outcome.len(),
            matrix.width()
        )));
    }
    (0..matrix.types())
        .map(|b| {
            let absent = feasible_with(matrix, outcome, b, false);
            let present = feasible_with(matrix, outcome, b, true);
            match (absent, present) {
                (true, true) => Ok(Verdict::Ambiguous),
                (true, false) => Ok(Verdict::Absent),
                (false, true) => Ok(Verdict::Present),
                (false, false) => Err(Error::InconsistentOutcome(outcome.to_string())),
            }
        })
        .collect()
}

type MemoKey = (MatrixKind, usize, u64);

thread_local! {
    static MEMO: RefCell<HashMap<MemoKey, Vec<Verdict>>> = RefCell::new(HashMap::new());
}

/// Per-type presence verdicts for one block.
pub fn decode_block(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Result<Vec<Verdict>> {
    if outcome.len() > 32 {
        return decode_uncached(outcome, matrix);
    }
    let key = (matrix.kind(), matrix.types(), outcome.key());
    if let Some(v) = MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return Ok(v);
    }
    let verdicts = decode_uncached(outcome, matrix)?;
    MEMO.with(|m| m.borrow_mut().insert(key, verdicts.clone()));
    Ok(verdicts)
}

/// Distinct presence patterns over all types among consistent scenarios, as
/// bitmasks (bit `b` set when type `b` is present). `None` if enumeration
/// exceeded its budget.
pub fn presence_patterns(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Option<Vec<u64>> {
    let search = Search::new(matrix, outcome);
    let start = search.start();
    let mut out = HashSet::new();
    let mut budget = ENUMERATION_BUDGET;
    if !search.viable(&start, 0) {
        return Some(Vec::new());
    }
    if !search.collect(&start, 0, 0, &mut out, &mut budget) {
        return None;
    }
    let mut v: Vec<u64> = out.into_iter().collect();
    v.sort_unstable();
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SlotOutcome::*;

    fn block(s: &[SlotOutcome]) -> BlockOutcome {
        BlockOutcome(s.to_vec())
    }

    /// Exhaustive oracle over all capped count vectors.
    fn brute(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Option<Vec<Verdict>> {
        let t = matrix.types();
        let mut can_absent = vec![false; t];
        let mut can_present = vec![false; t];
        let mut any = false;
        for code in 0..3u64.pow(t as u32) {
            let counts: Vec<u32> = (0..t)
                .map(|b| ((code / 3u64.pow(b as u32)) % 3) as u32)
                .collect();
            if matrix.outcome(&counts) == *outcome {
                any = true;
                for b in 0..t {
                    if counts[b] == 0 {
                        can_absent[b] = true;
                    } else {
                        can_present[b] = true;
                    }
                }
            }
        }
        any.then(|| {
            (0..t)
                .map(|b| match (can_absent[b], can_present[b]) {
                    (true, true) => Verdict::Ambiguous,
                    (true, false) => Verdict::Absent,
                    _ => Verdict::Present,
                })
                .collect()
        })
    }

    #[test]
    fn three_stage_examples() {
        let m = SymbolMatrix::three_stage(3);
        assert_eq!(
            decode_block(&block(&[Empty, Empty]), &m).unwrap(),
            vec![Verdict::Absent; 3]
        );
        assert_eq!(
            decode_block(&block(&[SingleBeta, Empty]), &m).unwrap(),
            vec![Verdict::Absent, Verdict::Present, Verdict::Absent]
        );
        assert_eq!(
            decode_block(&block(&[Collision, Collision]), &m).unwrap(),
            vec![Verdict::Ambiguous; 3]
        );
        assert!(matches!(
            decode_block(&block(&[SingleAlpha, Empty]), &m),
            Err(Error::InconsistentOutcome(_))
        ));
    }

    #[test]
    fn two_stage_examples() {
        let m = SymbolMatrix::two_stage(4);
        assert_eq!(
            decode_block(&block(&[SingleBeta, Collision]), &m).unwrap(),
            vec![
                Verdict::Absent,
                Verdict::Absent,
                Verdict::Present,
                Verdict::Present
            ]
        );
        assert_eq!(
            decode_block(&block(&[SingleAlpha, Collision]), &m).unwrap(),
            vec![
                Verdict::Ambiguous,
                Verdict::Ambiguous,
                Verdict::Present,
                Verdict::Absent
            ]
        );
    }

    #[test]
    fn matches_brute_force_on_every_outcome() {
        for (t, m) in [
            (3, SymbolMatrix::three_stage(3)),
            (4, SymbolMatrix::three_stage(4)),
            (4, SymbolMatrix::two_stage(4)),
            (5, SymbolMatrix::two_stage(5)),
            (6, SymbolMatrix::two_stage(6)),
        ] {
            let w = m.width();
            for code in 0..4u64.pow(w as u32) {
                let slots: Vec<SlotOutcome> = (0..w)
                    .map(|s| match (code >> (2 * s)) & 3 {
                        0 => Empty,
                        1 => SingleAlpha,
                        2 => SingleBeta,
                        _ => Collision,
                    })
                    .collect();
                let o = block(&slots);
                let got = decode_uncached(&o, &m).ok();
                assert_eq!(got, brute(&o, &m), "T={t} outcome {o}");
            }
        }
    }

    #[test]
    fn three_stage_unflagged_blocks_never_ambiguous() {
        for t in 2..=6 {
            let m = SymbolMatrix::three_stage(t);
            for code in 0..3u64.pow(t as u32) {
                let counts: Vec<u32> = (0..t)
                    .map(|b| ((code / 3u64.pow(b as u32)) % 3) as u32)
                    .collect();
                let o = m.outcome(&counts);
                let v = decode_block(&o, &m).unwrap();
                if !o.all_collision() {
                    assert!(v.iter().all(|&x| x != Verdict::Ambiguous), "{o}");
                }
            }
        }
    }

    #[test]
    fn patterns_of_partial_ambiguity() {
        let m = SymbolMatrix::two_stage(4);
        let p = presence_patterns(&block(&[SingleAlpha, Collision]), &m).unwrap();
        // either type 1 or type 2 present, type 3 present
        assert_eq!(p, vec![0b0101, 0b0110]);
    }
}
