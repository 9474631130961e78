//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hetcard::analysis::{
    expected_energy_3ss, expected_energy_trepbb, expected_k_r, zeta, EnergyMode, ThresholdKind,
};
use hetcard::config::{
    ceil_div, derive_config, derive_config_with, ConfigOverrides, EnergyCosts, ProtocolConfig,
};
use hetcard::frame::{Stage1Draw, Stage1Mode};
use hetcard::harness::presets::Preset;
use hetcard::harness::{preset, run_experiment, validate_accuracy, Activity, ResultRow, Scenario};
use hetcard::homogeneous::t_rep_bb;
use hetcard::hsrc::{run_baseline, run_hsrc, Baseline, Variant};
use hetcard::model::{PopulationSpec, SymbolMatrix};
use hetcard::rng::Streams;
use hetcard::three_stage::{run_3ss_bb, run_3ss_trial};
use hetcard::two_stage::{block_resolution, build_sym2_matrix, run_2ss_bb, run_2ss_trial};

const N_ALL: u64 = 1_000_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn config(types: usize, epsilon: f64) -> ProtocolConfig {
    derive_config(epsilon, 0.2, &vec![N_ALL; types], 6).unwrap()
}

fn config_ell(types: usize, ell: u64) -> ProtocolConfig {
    derive_config_with(
        0.03,
        0.2,
        &vec![N_ALL; types],
        6,
        ConfigOverrides {
            ell: Some(ell),
            ..Default::default()
        },
    )
    .unwrap()
}

fn pop(counts: Vec<u64>) -> PopulationSpec {
    PopulationSpec::with_common_total(counts, N_ALL).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn zeta_table() -> Check {
    // Reference lower and upper thresholds, T = 2..8.
    const LOWER: [f64; 7] = [0.4932, 0.6286, 0.6213, 0.5897, 0.5548, 0.522, 0.4926];
    const UPPER: [f64; 7] = [0.5384, 0.6622, 0.651, 0.6173, 0.5812, 0.5475, 0.5174];
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, t) in (2..=8).enumerate() {
        let lo = zeta(t, ThresholdKind::Lower).map_err(|e| e.to_string())?;
        let hi = zeta(t, ThresholdKind::Upper).map_err(|e| e.to_string())?;
        worst = worst.max((lo - LOWER[i]).abs()).max((hi - UPPER[i]).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max deviation {worst:.5}, {secs:.3} s");
    if worst <= 0.005 && secs < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mean_3ssbb_total(counts: &[u64], ell: u64, replicates: u64, seed: u64) -> f64 {
    let c = config_ell(counts.len(), ell);
    let p = pop(counts.to_vec());
    let rough: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let total: u64 = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = Streams::new(seed).replicate(r);
            run_3ss_bb(&p, &rough, &c, &s).unwrap().stage.ledger.total
        })
        .sum();
    total as f64 / replicates as f64
}

fn crossover() -> Check {
    let start = Instant::now();
    let ell = 3009;
    let below = mean_3ssbb_total(&[1500, 2 * ell, 2 * ell], ell, 300, 21);
    let above = mean_3ssbb_total(&[4000, 2 * ell, 2 * ell], ell, 300, 22);
    let secs = start.elapsed().as_secs_f64();
    let target = (3 * ell) as f64;
    let msg = format!("n1=1500: {below:.1}, n1=4000: {above:.1} against {target}, {secs:.1} s");
    if below < target && above > target && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn trep_exact() -> Check {
    let mut cases = 0;
    for t in 2..=6usize {
        for ell in [1075u64, 3009] {
            let c = config_ell(t, ell);
            let mut rng = ChaCha8Rng::seed_from_u64(t as u64 * ell);
            for r in 0..5 {
                let counts: Vec<u64> = (0..t).map(|_| rng.gen_range(0..8000)).collect();
                let rough: Vec<f64> = counts
                    .iter()
                    .map(|&n| n as f64 * rng.gen_range(0.5..1.5))
                    .collect();
                let out = t_rep_bb(&pop(counts), &rough, &c, &Streams::new(r));
                if out.ledger.total != t as u64 * ell
                    || out.ledger.protocol_total() != t as u64 * ell
                {
                    return Err(format!("T={t} ell={ell}: {} slots", out.ledger.total));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} runs, all exactly T*ell"))
}

fn equality_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..100u64 {
        let t = rng.gen_range(2..=6);
        let eps = [0.03, 0.05][rng.gen_range(0..2)];
        let counts: Vec<u64> = (0..t).map(|_| rng.gen_range(0..5000)).collect();
        let c = config(t, eps);
        let p = pop(counts.clone());
        let s = Streams::new(1000 + i);
        let base = run_baseline(Baseline::TxSrcs, &p, &c, &s).map_err(|e| e.to_string())?;
        for v in [Variant::Hsrc1, Variant::Hsrc2] {
            let r = run_hsrc(v, &p, &c, &s, None).map_err(|e| e.to_string())?;
            if r.estimates != base.estimates {
                return Err(format!("instance {i} {counts:?}: {v} differs"));
            }
        }
    }
    Ok("100 instances identical".into())
}

fn accuracy() -> Check {
    let start = Instant::now();
    let grid = [
        vec![500, 1250, 2000],
        vec![2000, 500, 1250],
        vec![1250, 2000, 500],
        vec![800, 800, 800],
        vec![2000, 2000, 2000],
    ];
    let mut worst = 1.0f64;
    for (gi, counts) in grid.iter().enumerate() {
        let scenario = Scenario::new(3, 0.05, Activity::Fixed(counts.clone()));
        for scheme in ["HSRC-1", "HSRC-2"] {
            let rates = validate_accuracy(
                scheme.parse().unwrap(),
                std::slice::from_ref(counts),
                &scenario,
                300,
                50 + gi as u64,
            )
            .map_err(|e| e.to_string())?;
            for r in rates {
                worst = worst.min(r.rate);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("lowest per-type rate {worst:.3}, {secs:.1} s");
    if worst >= 0.75 && secs < 300.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn moment_match() -> Check {
    let counts = vec![1000u64; 4];
    let c = config_ell(4, 3009);
    let p = pop(counts.clone());
    let n: Vec<f64> = counts.iter().map(|&x| x as f64).collect();
    let runs: Vec<(f64, f64)> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let run = run_3ss_bb(&p, &n, &c, &Streams::new(6).replicate(r)).unwrap();
            (
                run.stage.flagged.len() as f64,
                run.stage.escalated.len() as f64,
            )
        })
        .collect();
    let k = runs.iter().map(|x| x.0).sum::<f64>() / runs.len() as f64;
    let r = runs.iter().map(|x| x.1).sum::<f64>() / runs.len() as f64;
    let (ek, er) = expected_k_r(&n, &n, c.ell);
    let dk = (k - ek).abs() / ek;
    let dr = (r - er).abs() / er;
    let msg = format!(
        "E(K) {ek:.2} vs {k:.2} ({:.2}%), E(R) {er:.2} vs {r:.2} ({:.2}%)",
        dk * 100.0,
        dr * 100.0
    );
    if dk <= 0.05 && dr <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn row<'a>(rows: &'a [ResultRow], t: &str, scheme: &str) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.sweep_value == t && r.scheme == scheme)
        .expect("preset row")
}

fn ordering_and_savings() -> Check {
    let Preset::Experiment(spec) = preset("fig11a", None, 1).map_err(|e| e.to_string())? else {
        return Err("fig11a is not a slot experiment".into());
    };
    let rows = run_experiment(&spec).map_err(|e| e.to_string())?;
    let mut savings = Vec::new();
    for t in 3..=8 {
        let t = t.to_string();
        let m = |s: &str| row(&rows, &t, s).mean_slots;
        let (h2, h1, tx, two, three) = (m("HSRC-2"), m("HSRC-1"), m("TxSRCS"), m("2SS"), m("3SS"));
        if !(h2 <= h1 && h1 < tx && tx < two && two <= three) {
            return Err(format!(
                "T={t}: HSRC-2 {h2:.0}, HSRC-1 {h1:.0}, TxSRCS {tx:.0}, 2SS {two:.0}, 3SS {three:.0}"
            ));
        }
        savings.push(1.0 - h2 / tx);
    }
    let avg = savings.iter().sum::<f64>() / savings.len() as f64;
    let per_t: Vec<String> = savings
        .iter()
        .map(|s| format!("{:.1}", s * 100.0))
        .collect();
    let msg = format!(
        "ordering holds at T=3..8; HSRC-2 savings {}% (average {:.1}%)",
        per_t.join("/"),
        avg * 100.0
    );
    if (0.25..=0.50).contains(&avg) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Replays the stage-1 draw and checks every ledger field against it.
fn check_frame(
    t: usize,
    two_stage: bool,
    counts: Vec<u64>,
    ell: Option<u64>,
    seed: u64,
) -> Result<(), String> {
    let c = match ell {
        Some(l) => config_ell(t, l),
        None => config(t, 0.03),
    };
    let p = pop(counts.clone());
    let s = Streams::new(seed);
    let rough: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let (stage, blocks, mode) = match (ell, two_stage) {
        (None, false) => (
            run_3ss_trial(&p, &c, &s, 0).map(|r| r.stage),
            c.blocks,
            Stage1Mode::Trial { index: 0 },
        ),
        (None, true) => (
            run_2ss_trial(&p, &c, &s, 0).map(|r| r.stage),
            c.blocks,
            Stage1Mode::Trial { index: 0 },
        ),
        (Some(l), ts) => {
            let participation: Vec<f64> = rough.iter().map(|&r| c.participation(r)).collect();
            let run = if ts {
                run_2ss_bb(&p, &rough, &c, &s)
            } else {
                run_3ss_bb(&p, &rough, &c, &s)
            };
            (
                run.map(|r| r.stage),
                l as u32,
                Stage1Mode::BallsAndBins { participation },
            )
        }
    };
    let tag = format!("T={t} 2ss={two_stage} ell={ell:?} counts={counts:?} seed={seed}");
    let stage = stage.map_err(|e| format!("{tag}: {e}"))?;
    if !stage.is_sound() {
        return Err(format!("{tag}: presence differs from truth"));
    }
    let l = stage.ledger;
    if !l.is_consistent()
        || !stage.energy.is_consistent(&c.energy)
        || stage.energy.frame_slots != l.total
    {
        return Err(format!("{tag}: inconsistent ledger {l:?}"));
    }
    let draw = Stage1Draw::draw(&p, blocks, &mode, &s);
    let n = blocks as u64;
    let w = c.slot_width;
    let uses_2ss = two_stage && t > 3;
    let expected = if uses_2ss {
        let matrix = build_sym2_matrix(t);
        let mut stage2 = 0;
        for h in 0..draw.blocks {
            let counts = draw.counts(h);
            if counts.iter().any(|&x| x > 0) {
                stage2 += block_resolution(counts).map_err(|e| e.to_string())?.slots;
            }
        }
        (matrix.width() as u64 * n, stage2, 0, ceil_div(n, w))
    } else {
        let matrix = SymbolMatrix::three_stage(t);
        let flagged: Vec<u32> = (0..draw.blocks)
            .filter(|&h| draw.outcome(h, &matrix).all_collision())
            .map(|h| h as u32)
            .collect();
        if flagged != stage.flagged {
            return Err(format!("{tag}: flagged blocks differ"));
        }
        let k = flagged.len() as u64;
        (
            (t as u64 - 1) * n,
            k,
            (t as u64 - 1) * stage.escalated.len() as u64,
            ceil_div(n, w) + ceil_div(k, w),
        )
    };
    if (l.stage1, l.stage2, l.stage3, l.bp) != expected {
        return Err(format!("{tag}: ledger {l:?}, expected {expected:?}"));
    }
    Ok(())
}

fn soundness_suite() -> Check {
    let failures: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xF00D ^ i);
            let t = rng.gen_range(2..=8);
            let two_stage = i % 2 == 1;
            let ell = rng.gen_bool(0.3).then(|| rng.gen_range(32..=400u64));
            let cap = ell.map_or(3000, |l| 3 * l);
            let counts: Vec<u64> = (0..t)
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        0
                    } else {
                        rng.gen_range(0..=cap)
                    }
                })
                .collect();
            check_frame(t, two_stage, counts, ell, i).err()
        })
        .collect();
    match failures.first() {
        None => Ok("10000 frames sound, ledgers exact".into()),
        Some(f) => Err(format!("{} failures, first: {f}", failures.len())),
    }
}

fn energy() -> Check {
    // T-Rep-BB, with counts large enough that some types take part only partly.
    let counts = vec![1000u64, 6000, 9000];
    let rough = [1000.0, 5500.0, 10000.0];
    let c = config(3, 0.03);
    let p = pop(counts.clone());
    let per_rep: Vec<Vec<f64>> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            t_rep_bb(&p, &rough, &c, &Streams::new(9).replicate(r))
                .energy
                .mean_per_type(3)
        })
        .collect();
    let mut trep_dev = 0.0f64;
    for b in 0..3 {
        let emp = per_rep.iter().map(|v| v[b]).sum::<f64>() / per_rep.len() as f64;
        let ana = expected_energy_trepbb(rough[b], &c);
        trep_dev = trep_dev.max((emp - ana).abs() / ana);
    }

    // 3-SS trials at n_b = 1000, analytic frame set to the measured mean.
    let c3 = config(3, 0.03);
    let p3 = pop(vec![1000; 3]);
    let runs: Vec<(f64, Vec<f64>)> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let run = run_3ss_trial(&p3, &c3, &Streams::new(10).replicate(r), 0).unwrap();
            (
                run.stage.ledger.total as f64,
                run.stage.energy.mean_per_type(3),
            )
        })
        .collect();
    let frame = runs.iter().map(|r| r.0).sum::<f64>() / runs.len() as f64;
    let ana = expected_energy_3ss(
        &[1000.0; 3],
        &c3,
        &EnergyMode::Trial {
            blocks: c3.blocks,
            frame,
        },
    );
    let mut worst_z = 0.0f64;
    for b in 0..3 {
        let xs: Vec<f64> = runs.iter().map(|r| r.1[b]).collect();
        let (m, se) = mean_se(&xs);
        worst_z = worst_z.max((m - ana[b].energy).abs() / se.max(1e-12));
    }

    // Equal per-slot costs: every node spends frame length times gamma.
    let gamma = 0.7;
    let mut uniform_ok = true;
    for (i, v) in [Variant::Hsrc1, Variant::Hsrc2].into_iter().enumerate() {
        let cu = config(4, 0.03).with_energy(EnergyCosts::uniform(gamma));
        let pu = pop(vec![40, 700, 0, 2500]);
        let r = run_hsrc(v, &pu, &cu, &Streams::new(i as u64), None).map_err(|e| e.to_string())?;
        let want = r.ledger.total as f64 * gamma;
        uniform_ok &= r.energy.frame_slots == r.ledger.total
            && r.energy
                .nodes
                .iter()
                .all(|n| (n.energy - want).abs() <= 1e-9 * want);
    }

    let msg = format!(
        "T-Rep-BB max deviation {:.3}%, 3-SS max |z| {worst_z:.2}, uniform costs {}",
        trep_dev * 100.0,
        if uniform_ok { "exact" } else { "inexact" }
    );
    if trep_dev <= 0.02 && worst_z <= 3.0 && uniform_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("zeta table", zeta_table),
        ("crossover", crossover),
        ("exact T-Rep-BB length", trep_exact),
        ("estimator equality", equality_oracle),
        ("accuracy contract", accuracy),
        ("moment match", moment_match),
        ("ordering and savings", ordering_and_savings),
        ("decoder soundness", soundness_suite),
        ("energy", energy),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {}: PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
