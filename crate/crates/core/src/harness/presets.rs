//! Named parameter sets for the standard comparison sweeps.

use crate::config::ELL_TABLE;
use crate::error::{Error, Result};

use super::{Activity, ExperimentSpec, Scenario, Scheme, SweepPoint};

pub const PRESET_NAMES: [&str; 9] = [
    "fig7a", "fig7b", "fig8a", "fig8b", "fig9a", "fig9b", "fig10", "fig11a", "fig11b",
];

pub const SLOT_REPLICATES: u32 = 500;
pub const THRESHOLD_REPLICATES: u32 = 100;

/// A preset either sweeps schemes over scenarios or tabulates thresholds.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Experiment(ExperimentSpec),
    Thresholds {
        types: Vec<usize>,
        ells: Vec<u64>,
        others_ratios: Vec<f64>,
        replicates: u32,
        seed: u64,
    },
}

fn schemes(names: &[&str]) -> Vec<Scheme> {
    names
        .iter()
        .map(|n| n.parse().expect("preset scheme names are valid"))
        .collect()
}

fn binomial(types: usize, epsilon: f64, d: u64, q: f64) -> Scenario {
    Scenario::new(
        types,
        epsilon,
        Activity::Binomial {
            nodes_per_type: d,
            q,
        },
    )
}

fn point(value: impl ToString, scenario: Scenario) -> SweepPoint {
    SweepPoint {
        value: value.to_string(),
        series: None,
        scenario,
    }
}

const PHASE2_ELL: u64 = 3009;

fn experiment(
    name: &str,
    sweep_var: &str,
    points: Vec<SweepPoint>,
    scheme_names: &[&str],
    replicates: u32,
    seed: u64,
) -> Preset {
    Preset::Experiment(ExperimentSpec {
        name: name.into(),
        sweep_var: sweep_var.into(),
        points,
        schemes: schemes(scheme_names),
        replicates,
        seed,
        include_overhead: false,
    })
}

/// Phase-2 slot counts against one type's count, the rest fixed.
fn phase2_sweep(name: &str, types: usize, swept: usize, replicates: u32, seed: u64) -> Preset {
    let mut points = Vec::new();
    for rest in [500u64, 1000] {
        for n in (500..=3000).step_by(100) {
            let mut counts = vec![rest; types];
            counts[swept] = n;
            points.push(SweepPoint {
                value: n.to_string(),
                series: Some(format!("rest={rest}")),
                scenario: Scenario::new(types, 0.03, Activity::Fixed(counts)),
            });
        }
    }
    experiment(
        name,
        &format!("n{}", swept + 1),
        points,
        &["TRepBB", "3SSBB", "2SSBB"],
        replicates,
        seed,
    )
}

const ESTIMATOR_SCHEMES: [&str; 4] = [
    "HSRC-1/TRepBB",
    "HSRC-1/3SSBB",
    "HSRC-2/TRepBB",
    "HSRC-2/2SSBB",
];
const COMPARISON_SCHEMES: [&str; 5] = ["3SS", "2SS", "HSRC-1", "HSRC-2", "TxSRCS"];

/// Look up a preset by name. `replicates` replaces the default count.
pub fn preset(name: &str, replicates: Option<u32>, seed: u64) -> Result<Preset> {
    let reps = replicates.unwrap_or(SLOT_REPLICATES);
    Ok(match name {
        "fig7a" => experiment(
            name,
            "q",
            (1..=9)
                .map(|i| {
                    let q = i as f64 / 10.0;
                    point(q, binomial(4, 0.03, 1000, q))
                })
                .collect(),
            &ESTIMATOR_SCHEMES,
            reps,
            seed,
        ),
        "fig7b" => experiment(
            name,
            "D",
            (3..=12)
                .map(|k| {
                    let d = 1u64 << k;
                    point(d, binomial(4, 0.03, d, 0.8))
                })
                .collect(),
            &ESTIMATOR_SCHEMES,
            reps,
            seed,
        ),
        "fig8a" => phase2_sweep(name, 4, 1, reps, seed),
        "fig8b" => phase2_sweep(name, 5, 1, reps, seed),
        "fig9a" => Preset::Thresholds {
            types: (2..=8).collect(),
            ells: vec![PHASE2_ELL],
            others_ratios: vec![1.6],
            replicates: replicates.unwrap_or(THRESHOLD_REPLICATES),
            seed,
        },
        "fig9b" => Preset::Thresholds {
            types: vec![3],
            ells: ELL_TABLE.iter().map(|&(_, l)| l).collect(),
            others_ratios: vec![1.6, 2.0],
            replicates: replicates.unwrap_or(THRESHOLD_REPLICATES),
            seed,
        },
        "fig10" => {
            let grid = [0.5, 1.0, 1.5, 2.0].map(|r| (r * PHASE2_ELL as f64).round() as u64);
            let mut points = Vec::new();
            for n1 in [1500u64, 4000] {
                for &n2 in &grid {
                    for &n3 in &grid {
                        let counts = vec![n1, n2, n3];
                        points.push(SweepPoint {
                            value: format!("{n2}x{n3}"),
                            series: Some(format!("n1={n1}")),
                            scenario: Scenario::new(3, 0.03, Activity::Fixed(counts)),
                        });
                    }
                }
            }
            experiment(name, "n2xn3", points, &["TRepBB", "3SSBB"], reps, seed)
        }
        "fig11a" => experiment(
            name,
            "T",
            (3..=8)
                .map(|t| point(t, binomial(t, 0.03, 100, 0.15)))
                .collect(),
            &COMPARISON_SCHEMES,
            reps,
            seed,
        ),
        "fig11b" => experiment(
            name,
            "epsilon",
            ELL_TABLE
                .iter()
                .map(|&(eps, _)| point(eps, binomial(4, eps, 100, 0.15)))
                .collect(),
            &COMPARISON_SCHEMES,
            reps,
            seed,
        ),
        _ => {
            return Err(Error::config(
                "figure",
                format!(
                    "unknown preset `{name}`; choose one of {}",
                    PRESET_NAMES.join(", ")
                ),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_and_validates() {
        for name in PRESET_NAMES {
            match preset(name, Some(1), 0).unwrap() {
                Preset::Experiment(spec) => spec.validate().unwrap(),
                Preset::Thresholds { types, ells, .. } => {
                    assert!(!types.is_empty() && !ells.is_empty())
                }
            }
        }
        assert!(preset("fig12", None, 0).is_err());
    }

    #[test]
    fn caption_parameters() {
        let Preset::Experiment(s) = preset("fig11a", None, 0).unwrap() else {
            panic!()
        };
        assert_eq!(s.replicates, SLOT_REPLICATES);
        assert_eq!(s.points.len(), 6);
        for p in &s.points {
            assert_eq!(p.scenario.epsilon, 0.03);
            assert_eq!(
                p.scenario.activity,
                Activity::Binomial {
                    nodes_per_type: 100,
                    q: 0.15
                }
            );
            assert_eq!(p.scenario.config().unwrap().blocks, 20);
        }
        let Preset::Experiment(s) = preset("fig8a", None, 0).unwrap() else {
            panic!()
        };
        assert_eq!(s.points.len(), 52);
        assert!(s
            .points
            .iter()
            .all(|p| p.scenario.config().unwrap().ell == 3009));
    }
}
