//! The 2-stage scheme and 2-SS-BB.
//!
//! Stage 1 packs `T` types into `floor(T/2)` slots per block using alpha
//! prefixes and beta suffixes. Any block the decoder cannot fully resolve is
//! handled in stage 2, either with a few single-type probe slots or, when
//! every slot collided, by splitting the types into two groups that each
//! rerun the stage-1 encoding in one sub-block. Groups of at most three types
//! fall back to the 3-stage follow-up.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::config::{ceil_div, ProtocolConfig};
use crate::decode::{decode_block, presence_patterns};
use crate::error::{Error, Result};
use crate::frame::{SsBbRun, Stage1Draw, Stage1Mode, StageRun, TrialOutcome};
use crate::ledger::{EnergyLedger, PresenceSets, SlotLedger};
use crate::model::{BlockOutcome, PopulationSpec, SlotOutcome, Symbol, SymbolMatrix, Verdict};
use crate::rng::Streams;
use crate::three_stage::{run_3ss_bb, run_3ss_trial};

/// Largest number of ambiguous types for which a minimal probe set is searched.
const MAX_PROBE_SEARCH: usize = 12;

pub fn build_sym2_matrix(types: usize) -> SymbolMatrix {
    SymbolMatrix::two_stage(types)
}

pub fn decode_block_2ss(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Result<Vec<Verdict>> {
    decode_block(outcome, matrix)
}

/// Stage-2 action for one block or sub-block. Type indices are local to the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionStep {
    /// Nothing ambiguous.
    Done,
    /// One alpha slot per listed type; an empty slot means the type is absent.
    Probes(Vec<usize>),
    /// Three-stage follow-up: a type-1 slot, then dedicated slots if it collides.
    ThreeStage,
    /// Split into two groups that each rerun the stage-1 encoding.
    Split {
        first: Vec<usize>,
        second: Vec<usize>,
    },
}

/// Stage-2 action for every block of a frame, by block index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionPlan {
    pub steps: Vec<(u32, ResolutionStep)>,
}

impl ResolutionPlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Smallest subset of `ambiguous` whose presence bits tell `patterns` apart,
/// by size then lexicographic order. Falls back to all of `ambiguous`.
fn minimal_probes(ambiguous: &[usize], patterns: &[u64]) -> Vec<usize> {
    let k = ambiguous.len();
    if k > MAX_PROBE_SEARCH || patterns.len() <= 1 {
        return if patterns.len() <= 1 {
            Vec::new()
        } else {
            ambiguous.to_vec()
        };
    }
    let separates = |subset: &[usize]| {
        let mut seen = std::collections::HashSet::new();
        patterns.iter().all(|&p| {
            let key: u64 = subset
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &b)| acc | (((p >> b) & 1) << i));
            seen.insert(key)
        })
    };
    for size in 1..=k {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<usize> = idx.iter().map(|&i| ambiguous[i]).collect();
            if separates(&subset) {
                return subset;
            }
            if !next_combination(&mut idx, k) {
                break;
            }
        }
    }
    ambiguous.to_vec()
}

/// Advance `idx` to the next `idx.len()`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn split_groups(types: usize) -> (Vec<usize>, Vec<usize>) {
    let cut = types.div_ceil(2);
    ((0..cut).collect(), (cut..types).collect())
}

/// Decide the stage-2 action for one (sub-)block from what the base station saw.
pub fn plan_step(outcome: &BlockOutcome, matrix: &SymbolMatrix) -> Result<ResolutionStep> {
    let verdicts = decode_block(outcome, matrix)?;
    let ambiguous: Vec<usize> = (0..verdicts.len())
        .filter(|&b| verdicts[b] == Verdict::Ambiguous)
        .collect();
    if ambiguous.is_empty() {
        return Ok(ResolutionStep::Done);
    }
    let types = matrix.types();
    if outcome.all_collision() {
        if types <= 3 {
            return Ok(ResolutionStep::ThreeStage);
        }
        let (first, second) = split_groups(types);
        return Ok(ResolutionStep::Split { first, second });
    }
    let probes = match presence_patterns(outcome, matrix) {
        Some(patterns) => minimal_probes(&ambiguous, &patterns),
        None => ambiguous,
    };
    Ok(ResolutionStep::Probes(probes))
}

/// Stage-2 plan for a whole frame.
pub fn plan_resolution(outcomes: &[BlockOutcome], types: usize) -> Result<ResolutionPlan> {
    let matrix = build_sym2_matrix(types);
    let mut steps = Vec::new();
    for (h, o) in outcomes.iter().enumerate() {
        let step = plan_step(o, &matrix)?;
        if step != ResolutionStep::Done {
            steps.push((h as u32, step));
        }
    }
    Ok(ResolutionPlan { steps })
}

/// What resolving one block cost and revealed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockResolution {
    /// Presence of each type in the block, as recovered by the base station.
    pub presence: Vec<bool>,
    /// Stage-2 slots spent on the block.
    pub slots: u64,
    /// Stage-2 transmissions made by each node of each type.
    pub tx: Vec<u64>,
    /// Sub-instances still needing instructions, by nesting depth.
    pub pending: Vec<u64>,
    /// Whether the types were split into groups.
    pub split: bool,
}

impl BlockResolution {
    pub fn needs_stage2(&self) -> bool {
        self.slots > 0
    }
}

fn merge_pending(into: &mut Vec<u64>, from: &[u64], shift: usize) {
    for (d, &c) in from.iter().enumerate() {
        let at = d + shift;
        if into.len() <= at {
            into.resize(at + 1, 0);
        }
        into[at] += c;
    }
}

/// Resolve a (sub-)block given the true transmitter counts of its group.
pub fn resolve_block(counts: &[u32], outcome: &BlockOutcome) -> Result<BlockResolution> {
    let types = counts.len();
    let matrix = build_sym2_matrix(types);
    let verdicts = decode_block(outcome, &matrix)?;
    let mut res = BlockResolution {
        presence: verdicts.iter().map(|&v| v == Verdict::Present).collect(),
        slots: 0,
        tx: vec![0; types],
        pending: Vec::new(),
        split: false,
    };
    match plan_step(outcome, &matrix)? {
        ResolutionStep::Done => {}
        ResolutionStep::ThreeStage => {
            res.slots += 1;
            res.tx[0] += 1;
            match SlotOutcome::Empty.with_many(Symbol::Alpha, counts[0]) {
                SlotOutcome::Empty => {
                    res.presence[0] = false;
                    res.presence[1..].fill(true);
                }
                SlotOutcome::SingleAlpha => res.presence.fill(true),
                _ => {
                    res.presence[0] = true;
                    res.slots += types as u64 - 1;
                    for b in 1..types {
                        res.tx[b] += 1;
                        res.presence[b] = !SlotOutcome::Empty
                            .with_many(Symbol::Beta, counts[b])
                            .is_empty();
                    }
                }
            }
        }
        ResolutionStep::Probes(probes) => {
            let patterns = presence_patterns(outcome, &matrix).unwrap_or_default();
            let mut observed = 0u64;
            let mut mask = 0u64;
            for &b in &probes {
                res.slots += 1;
                res.tx[b] += 1;
                mask |= 1 << b;
                if !SlotOutcome::Empty
                    .with_many(Symbol::Alpha, counts[b])
                    .is_empty()
                {
                    observed |= 1 << b;
                }
            }
            let ambiguous: Vec<usize> = (0..types)
                .filter(|&b| verdicts[b] == Verdict::Ambiguous)
                .collect();
            if probes.len() == ambiguous.len() {
                for &b in &probes {
                    res.presence[b] = observed & (1 << b) != 0;
                }
            } else {
                let matches: Vec<u64> = patterns
                    .iter()
                    .copied()
                    .filter(|&p| p & mask == observed)
                    .collect();
                let [pattern] = matches[..] else {
                    return Err(Error::InconsistentOutcome(format!(
                        "probes left {} candidate patterns for {outcome}",
                        matches.len()
                    )));
                };
                for &b in &ambiguous {
                    res.presence[b] = pattern & (1 << b) != 0;
                }
            }
        }
        ResolutionStep::Split { first, second } => {
            res.split = true;
            let mut depth_one = 0;
            for group in [first, second] {
                let sub_counts: Vec<u32> = group.iter().map(|&b| counts[b]).collect();
                let sub_matrix = build_sym2_matrix(group.len());
                let sub_outcome = sub_matrix.outcome(&sub_counts);
                res.slots += sub_matrix.width() as u64;
                for (i, &b) in group.iter().enumerate() {
                    res.tx[b] += sub_matrix.transmissions(i) as u64;
                }
                let sub = resolve_block(&sub_counts, &sub_outcome)?;
                if sub.needs_stage2() {
                    depth_one += 1;
                }
                res.slots += sub.slots;
                for (i, &b) in group.iter().enumerate() {
                    res.presence[b] = sub.presence[i];
                    res.tx[b] += sub.tx[i];
                }
                merge_pending(&mut res.pending, &sub.pending, 1);
            }
            merge_pending(&mut res.pending, &[depth_one], 0);
        }
    }
    Ok(res)
}

type CostKey = (usize, u64);

thread_local! {
    static BLOCK_CACHE: RefCell<HashMap<CostKey, Rc<BlockResolution>>> = RefCell::new(HashMap::new());
}

/// Resolution of a block with the given transmitter counts. Counts above two
/// behave like two, so results are cached on the capped vector.
pub fn block_resolution(counts: &[u32]) -> Result<Rc<BlockResolution>> {
    let capped: Vec<u32> = counts.iter().map(|&c| c.min(2)).collect();
    let code = capped.iter().rev().fold(0u64, |acc, &c| acc * 3 + c as u64);
    let key = (counts.len(), code);
    if let Some(r) = BLOCK_CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(r);
    }
    let outcome = build_sym2_matrix(counts.len()).outcome(&capped);
    let res = Rc::new(resolve_block(&capped, &outcome)?);
    BLOCK_CACHE.with(|c| c.borrow_mut().insert(key, res.clone()));
    Ok(res)
}

fn run_2ss(
    population: &PopulationSpec,
    blocks: u32,
    mode: &Stage1Mode,
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<StageRun> {
    let types = population.types();
    let matrix = build_sym2_matrix(types);
    let draw = Stage1Draw::draw(population, blocks, mode, streams);
    let n_blocks = draw.blocks;
    let mut presence = PresenceSets::new(types, n_blocks);
    let mut resolutions = Vec::with_capacity(n_blocks);
    let mut stage2 = 0u64;
    let mut pending: Vec<u64> = Vec::new();
    let mut flagged = Vec::new();
    let mut escalated = Vec::new();
    for h in 0..n_blocks {
        let counts = draw.counts(h);
        let res = if counts.iter().all(|&c| c == 0) {
            None
        } else {
            Some(block_resolution(counts)?)
        };
        if let Some(r) = &res {
            for b in 0..types {
                presence.present[b][h] = r.presence[b];
            }
            if r.needs_stage2() {
                presence.flagged[h] = true;
                flagged.push(h as u32);
                stage2 += r.slots;
                if r.split {
                    escalated.push(h as u32);
                }
                merge_pending(&mut pending, &r.pending, 0);
            }
        }
        resolutions.push(res);
    }
    let width = config.slot_width;
    let bp = ceil_div(n_blocks as u64, width);
    let overhead = ceil_div(2 * n_blocks as u64, width)
        + pending.iter().map(|&c| ceil_div(2 * c, width)).sum::<u64>();
    let ledger = SlotLedger::new(
        matrix.width() as u64 * n_blocks as u64,
        stage2,
        0,
        bp,
        overhead,
    );

    let mut energy = EnergyLedger::empty(population.active(), ledger.total);
    let mut node = 0usize;
    for (b, picks) in draw.choices.iter().enumerate() {
        for pick in picks {
            if let Some(h) = pick {
                let r = resolutions[*h as usize]
                    .as_ref()
                    .expect("occupied block has a resolution");
                let rec = &mut energy.nodes[node];
                rec.tx = matrix.transmissions(b) as u64 + r.tx[b];
                rec.rx = bp + if r.needs_stage2() { overhead } else { 0 };
            }
            node += 1;
        }
    }
    energy.finish(&config.energy);
    Ok(StageRun {
        truth: draw.truth(),
        presence,
        flagged,
        escalated,
        ledger,
        energy,
    })
}

/// One 2-SS trial over `config.blocks` geometrically chosen blocks.
/// Identical to the 3-stage trial for two or three types.
pub fn run_2ss_trial(
    population: &PopulationSpec,
    config: &ProtocolConfig,
    streams: &Streams,
    trial_index: u32,
) -> Result<TrialOutcome> {
    if population.types() <= 3 {
        return run_3ss_trial(population, config, streams, trial_index);
    }
    let stage = run_2ss(
        population,
        config.blocks,
        &Stage1Mode::Trial { index: trial_index },
        config,
        streams,
    )?;
    Ok(TrialOutcome::from_stage(stage))
}

/// 2-SS-BB over `ell` uniformly chosen blocks.
pub fn run_2ss_bb(
    population: &PopulationSpec,
    rough: &[f64],
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<SsBbRun> {
    if population.types() <= 3 {
        return run_3ss_bb(population, rough, config, streams);
    }
    let participation: Vec<f64> = rough.iter().map(|&r| config.participation(r)).collect();
    let blocks = u32::try_from(config.ell).map_err(|_| Error::config("ell", "too large"))?;
    let stage = run_2ss(
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::derive_config;
    use crate::homogeneous::{bb_trial, BBTrialPlan};
    use crate::model::SlotOutcome::*;
    use crate::rng::Purpose;

    fn cfg(types: usize) -> ProtocolConfig {
        derive_config(0.03, 0.2, &vec![1000; types], 6).unwrap()
    }

    #[test]
    fn t5_all_collision_splits_three_and_two() {
        let m = build_sym2_matrix(5);
        let o = BlockOutcome(vec![Collision, Collision]);
        assert_eq!(
            plan_step(&o, &m).unwrap(),
            ResolutionStep::Split {
                first: vec![0, 1, 2],
                second: vec![3, 4]
            }
        );
    }

    #[test]
    fn partial_ambiguity_needs_one_probe() {
        let m = build_sym2_matrix(4);
        let o = BlockOutcome(vec![SingleAlpha, Collision]);
        assert_eq!(plan_step(&o, &m).unwrap(), ResolutionStep::Probes(vec![0]));
        // type 2 and type 3 present: probe of type 1 is empty
        let r = resolve_block(&[0, 1, 1, 0], &o).unwrap();
        assert_eq!(r.presence, vec![false, true, true, false]);
        assert_eq!(r.slots, 1);
        let r = resolve_block(&[1, 0, 2, 0], &o).unwrap();
        assert_eq!(r.presence, vec![true, false, true, false]);
    }

    #[test]
    fn empty_plan_when_unambiguous() {
        let outcomes = vec![
            BlockOutcome(vec![Empty, Empty]),
            BlockOutcome(vec![SingleBeta, Collision]),
        ];
        assert!(plan_resolution(&outcomes, 4).unwrap().is_empty());
    }

    #[test]
    fn probe_search_is_minimal() {
        // patterns over types {0,1,2}: any two bits suffice, {0,1} comes first
        let patterns = [0b011, 0b101, 0b110];
        assert_eq!(minimal_probes(&[0, 1, 2], &patterns), vec![0, 1]);
        assert_eq!(minimal_probes(&[0, 1], &[0b01, 0b10]), vec![0]);
        assert!(minimal_probes(&[0], &[0b1]).is_empty());
    }

    #[test]
    fn every_capped_vector_resolves_exactly() {
        for t in 2..=7 {
            for code in 0..3u64.pow(t as u32) {
                let counts: Vec<u32> = (0..t)
                    .map(|b| ((code / 3u64.pow(b as u32)) % 3) as u32)
                    .collect();
                let r = block_resolution(&counts).unwrap();
                let truth: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
                assert_eq!(r.presence, truth, "T={t} counts {counts:?}");
            }
        }
    }

    #[test]
    fn small_type_counts_match_three_stage() {
        for t in [2usize, 3] {
            let c = cfg(t);
            for seed in 0..10 {
                let pop = PopulationSpec::with_common_total(vec![40; t], 1000).unwrap();
                let s = Streams::new(seed);
                let a = run_2ss_trial(&pop, &c, &s, 2).unwrap();
                let b = run_3ss_trial(&pop, &c, &s, 2).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn trial_soundness_and_ledger() {
        for t in 4..=8 {
            let c = cfg(t);
            for seed in 0..30 {
                let n: Vec<u64> = (0..t as u64).map(|b| (seed * 11 + b * 17) % 80).collect();
                let pop = PopulationSpec::with_common_total(n, 1000).unwrap();
                let tr = run_2ss_trial(&pop, &c, &Streams::new(seed), 0).unwrap();
                let s = &tr.stage;
                assert!(s.is_sound(), "T={t} seed={seed}");
                assert_eq!(s.ledger.stage1, (t as u64 / 2) * c.blocks as u64);
                assert_eq!(s.ledger.stage3, 0);
                assert_eq!(s.ledger.bp, ceil_div(c.blocks as u64, 6));
                assert!(s.ledger.is_consistent());
                assert!(s.energy.is_consistent(&c.energy));
            }
        }
        let zero = PopulationSpec::with_common_total(vec![0; 5], 1000).unwrap();
        let tr = run_2ss_trial(&zero, &cfg(5), &Streams::new(0), 0).unwrap();
        assert_eq!(tr.stage.ledger.stage2, 0);
        assert_eq!(tr.first_vacant, vec![1; 5]);
    }

    #[test]
    fn bb_empty_counts_match_standalone_trial() {
        let c = cfg(5);
        let pop = PopulationSpec::with_common_total(vec![900, 50, 0, 1000, 400], 1000).unwrap();
        let rough = [800.0, 60.0, 1.2897, 1200.0, 500.0];
        let streams = Streams::new(8);
        let run = run_2ss_bb(&pop, &rough, &c, &streams).unwrap();
        assert!(run.stage.is_sound());
        for b in 0..5 {
            let plan = BBTrialPlan::from_rough(c.ell, rough[b]);
            let solo = bb_trial(
                pop.active_count(b),
                plan,
                &mut streams.stream(b, Purpose::Phase2),
            );
            assert_eq!(run.empty[b], solo.empty);
        }
        let none = run_2ss_bb(&pop, &[f64::INFINITY; 5], &c, &streams).unwrap();
        assert!(none.empty.iter().all(|&z| z == c.ell));
        assert_eq!(none.stage.ledger.stage2, 0);
    }
}
