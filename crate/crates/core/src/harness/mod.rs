//! Monte-Carlo experiment driver, figure presets, accuracy validation,
//! ell calibration and CSV output.

pub mod accuracy;
pub mod crossover;
pub mod output;
pub mod presets;
pub mod settings;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{
    derive_config_with, ConfigOverrides, EnergyCosts, ProtocolConfig, DEFAULT_SLOT_WIDTH,
};
use crate::error::{Error, Result};
use crate::hsrc::{run_baseline, run_hsrc, run_phase2, Baseline, Variant};
use crate::ledger::SlotLedger;
use crate::model::{ActivityModel, Phase2Method, PopulationSpec};
use crate::rng::{Purpose, Streams};

pub use accuracy::{calibrate_ell, validate_accuracy, wilson_interval, AccuracyRate};
pub use crossover::{empirical_crossover, threshold_table, ThresholdRow};
pub use output::{format_sig, write_csv, CSV_HEADER};
pub use presets::{preset, PRESET_NAMES};
pub use settings::Settings;

/// Manufactured count per type used by every preset; gives 20-slot trials.
pub const DEFAULT_MANUFACTURED: u64 = 1_000_000;

/// A scheme whose slot count and accuracy an experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Full two-phase estimator; `phase2` forces the phase-2 method.
    Hsrc {
        variant: Variant,
        phase2: Option<Phase2Method>,
    },
    Baseline(Baseline),
    /// The balls-and-bins phase alone, fed with rough estimates from the scenario.
    Phase2 {
        variant: Variant,
        method: Phase2Method,
    },
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ssbb = |v: &Variant| match v {
            Variant::Hsrc1 => "3SSBB",
            Variant::Hsrc2 => "2SSBB",
        };
        match self {
            Scheme::Hsrc { variant, phase2 } => match phase2 {
                None => write!(f, "{variant}"),
                Some(Phase2Method::TRepBB) => write!(f, "{variant}/TRepBB"),
                Some(Phase2Method::SSBB) => write!(f, "{variant}/{}", ssbb(variant)),
            },
            Scheme::Baseline(b) => write!(f, "{b}"),
            Scheme::Phase2 {
                method: Phase2Method::TRepBB,
                ..
            } => f.write_str("TRepBB"),
            Scheme::Phase2 { variant, .. } => f.write_str(ssbb(variant)),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let (head, tail) = match key.split_once('/') {
            Some((h, t)) => (h.to_string(), Some(t.to_string())),
            None => (key.clone(), None),
        };
        let variant = match head.as_str() {
            "HSRC-1" | "HSRC1" => Some(Variant::Hsrc1),
            "HSRC-2" | "HSRC2" => Some(Variant::Hsrc2),
            _ => None,
        };
        if let Some(variant) = variant {
            let phase2 = match tail.as_deref() {
                None => None,
                Some("TREPBB") => Some(Phase2Method::TRepBB),
                Some("3SSBB") if variant == Variant::Hsrc1 => Some(Phase2Method::SSBB),
                Some("2SSBB") if variant == Variant::Hsrc2 => Some(Phase2Method::SSBB),
                Some(other) => {
                    return Err(Error::config(
                        "scheme",
                        format!("unknown phase-2 method `{other}`"),
                    ))
                }
            };
            return Ok(Scheme::Hsrc { variant, phase2 });
        }
        match key.as_str() {
            "TREPBB" => Ok(Scheme::Phase2 {
                variant: Variant::Hsrc1,
                method: Phase2Method::TRepBB,
            }),
            "3SSBB" => Ok(Scheme::Phase2 {
                variant: Variant::Hsrc1,
                method: Phase2Method::SSBB,
            }),
            "2SSBB" => Ok(Scheme::Phase2 {
                variant: Variant::Hsrc2,
                method: Phase2Method::SSBB,
            }),
            _ => s.parse().map(Scheme::Baseline),
        }
    }
}

/// How the active counts of a frame arise.
#[derive(Debug, Clone, PartialEq)]
pub enum Activity {
    /// Each of `nodes_per_type` nodes of every type is active with probability `q`.
    Binomial { nodes_per_type: u64, q: f64 },
    /// Fixed active counts.
    Fixed(Vec<u64>),
}

/// Fixed parameters of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub types: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub activity: Activity,
    /// Rough estimates handed to phase-2-only schemes; the true counts when absent.
    pub rough: Option<Vec<f64>>,
    pub manufactured: u64,
    pub slot_width: u32,
    pub overrides: ConfigOverrides,
    pub energy: EnergyCosts,
}

impl Scenario {
    pub fn new(types: usize, epsilon: f64, activity: Activity) -> Self {
        Scenario {
            types,
            epsilon,
            delta: 0.2,
            activity,
            rough: None,
            manufactured: DEFAULT_MANUFACTURED,
            slot_width: DEFAULT_SLOT_WIDTH,
            overrides: ConfigOverrides::default(),
            energy: EnergyCosts::default(),
        }
    }

    pub fn config(&self) -> Result<ProtocolConfig> {
        Ok(derive_config_with(
            self.epsilon,
            self.delta,
            &vec![self.manufactured; self.types],
            self.slot_width,
            self.overrides,
        )?
        .with_energy(self.energy))
    }

    pub fn population(&self, streams: &Streams) -> Result<PopulationSpec> {
        match &self.activity {
            Activity::Fixed(counts) => {
                if counts.len() != self.types {
                    return Err(Error::config(
                        "n",
                        format!("{} counts given for {} types", counts.len(), self.types),
                    ));
                }
                PopulationSpec::with_common_total(counts.clone(), self.manufactured)
            }
            Activity::Binomial { nodes_per_type, q } => PopulationSpec::sample(
                self.types,
                ActivityModel {
                    nodes_per_type: *nodes_per_type,
                    activation_prob: *q,
                },
                self.manufactured,
                &mut streams.stream(0, Purpose::Activity),
            ),
        }
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    /// Appended to scheme names, for figures plotting several series per scheme.
    pub series: Option<String>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub sweep_var: String,
    pub points: Vec<SweepPoint>,
    pub schemes: Vec<Scheme>,
    pub replicates: u32,
    pub seed: u64,
    /// Count broadcast slots the estimators add beyond the protocol frame structure.
    pub include_overhead: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.points.is_empty() {
            return Err(Error::config("sweep", "no sweep points"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "no schemes"));
        }
        for p in &self.points {
            if p.scenario.types < 2 {
                return Err(Error::config("T", "need at least 2 types"));
            }
            p.scenario.config()?;
        }
        Ok(())
    }
}

/// Aggregated results of one scheme at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub scheme: String,
    pub replicates: u32,
    pub mean_slots: f64,
    pub se_slots: f64,
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
    pub bp: f64,
    /// Lowest per-type rate of estimates within `epsilon` of the truth.
    pub acc_rate_min: f64,
    pub energy_mean_per_type: Vec<f64>,
}

/// What a single replicate contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub truth: Vec<u64>,
    pub estimates: Vec<f64>,
    pub ledger: SlotLedger,
    pub energy_per_type: Vec<f64>,
}

impl ReplicateResult {
    pub fn slots(&self, include_overhead: bool) -> u64 {
        if include_overhead {
            self.ledger.total
        } else {
            self.ledger.protocol_total()
        }
    }
}

/// Run one frame of `scheme`.
pub fn run_replicate(
    scheme: Scheme,
    scenario: &Scenario,
    config: &ProtocolConfig,
    streams: &Streams,
) -> Result<ReplicateResult> {
    let population = scenario.population(streams)?;
    let types = population.types();
    let (estimates, ledger, energy) = match scheme {
        Scheme::Hsrc { variant, phase2 } => {
            let r = run_hsrc(variant, &population, config, streams, phase2)?;
            (r.estimates, r.ledger, r.energy)
        }
        Scheme::Baseline(b) => {
            let r = run_baseline(b, &population, config, streams)?;
            (r.estimates, r.ledger, r.energy)
        }
        Scheme::Phase2 { variant, method } => {
            let rough = match &scenario.rough {
                Some(r) => r.clone(),
                None => population.active().iter().map(|&n| n as f64).collect(),
            };
            let out = run_phase2(variant, method, &population, &rough, config, streams)?;
            let (est, _) = out.estimates(config.ell);
            (est, out.ledger, out.energy)
        }
    };
    Ok(ReplicateResult {
        truth: population.active().to_vec(),
        estimates,
        ledger,
        energy_per_type: energy.mean_per_type(types),
    })
}

/// Streams for replicate `r` at sweep point `point`. Every scheme at a point
/// sees the same draws.
pub fn replicate_streams(seed: u64, point: usize, r: u32) -> Streams {
    Streams::new(seed)
        .replicate(point as u64)
        .replicate(r as u64)
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

fn aggregate(
    spec: &ExperimentSpec,
    point: &SweepPoint,
    scheme: Scheme,
    epsilon: f64,
    results: &[ReplicateResult],
) -> ResultRow {
    let n = results.len();
    let slots: Vec<f64> = results
        .iter()
        .map(|r| r.slots(spec.include_overhead) as f64)
        .collect();
    let mean_slots = mean(slots.iter().copied(), n);
    let se_slots = if n > 1 {
        let var = slots.iter().map(|s| (s - mean_slots).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let types = results[0].truth.len();
    let acc_rate_min = (0..types)
        .map(|b| {
            let hits = results
                .iter()
                .filter(|r| {
                    let t = r.truth[b] as f64;
                    (r.estimates[b] - t).abs() <= epsilon * t + 1e-9
                })
                .count();
            hits as f64 / n as f64
        })
        .fold(1.0, f64::min);
    let scheme_name = match &point.series {
        Some(s) => format!("{scheme}[{s}]"),
        None => scheme.to_string(),
    };
    ResultRow {
        sweep_var: spec.sweep_var.clone(),
        sweep_value: point.value.clone(),
        scheme: scheme_name,
        replicates: n as u32,
        mean_slots,
        se_slots,
        stage1: mean(results.iter().map(|r| r.ledger.stage1 as f64), n),
        stage2: mean(results.iter().map(|r| r.ledger.stage2 as f64), n),
        stage3: mean(results.iter().map(|r| r.ledger.stage3 as f64), n),
        bp: mean(results.iter().map(|r| r.ledger.bp as f64), n),
        acc_rate_min,
        energy_mean_per_type: (0..types)
            .map(|b| mean(results.iter().map(|r| r.energy_per_type[b]), n))
            .collect(),
    }
}

/// Run every scheme at every sweep point. Replicates run in parallel and are
/// aggregated in index order, so output does not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.points.len() * spec.schemes.len());
    for (pi, point) in spec.points.iter().enumerate() {
        let config = point.scenario.config()?;
        for &scheme in &spec.schemes {
            let results: Vec<ReplicateResult> = (0..spec.replicates)
                .into_par_iter()
                .map(|r| {
                    run_replicate(
                        scheme,
                        &point.scenario,
                        &config,
                        &replicate_streams(spec.seed, pi, r),
                    )
                })
                .collect::<Result<_>>()?;
            rows.push(aggregate(
                spec,
                point,
                scheme,
                point.scenario.epsilon,
                &results,
            ));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for name in [
            "HSRC-1",
            "HSRC-2",
            "HSRC-1/TRepBB",
            "HSRC-1/3SSBB",
            "HSRC-2/TRepBB",
            "HSRC-2/2SSBB",
            "3SS",
            "2SS",
            "TxSRCS",
            "TRepBB",
            "3SSBB",
            "2SSBB",
        ] {
            let s: Scheme = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("HSRC-1/2SSBB".parse::<Scheme>().is_err());
        assert!("bogus".parse::<Scheme>().is_err());
    }

    fn small_spec(replicates: u32) -> ExperimentSpec {
        let scenario = Scenario::new(
            3,
            0.05,
            Activity::Binomial {
                nodes_per_type: 200,
                q: 0.5,
            },
        );
        ExperimentSpec {
            name: "t".into(),
            sweep_var: "q".into(),
            points: vec![SweepPoint {
                value: "0.5".into(),
                series: None,
                scenario,
            }],
            schemes: vec!["HSRC-1".parse().unwrap(), "TxSRCS".parse().unwrap()],
            replicates,
            seed: 5,
            include_overhead: false,
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&small_spec(8)).unwrap();
        let b = run_experiment(&small_spec(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].mean_slots, (3 * (10 * 20 + 1075)) as f64);
        assert_eq!(a[1].se_slots, 0.0);
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.acc_rate_min)));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small_spec(0);
        assert!(matches!(run_experiment(&s), Err(Error::Config { .. })));
        s.replicates = 1;
        s.points[0].scenario.epsilon = 0.07;
        assert!(run_experiment(&s).is_err());
        s.points.clear();
        assert!(run_experiment(&s).is_err());
    }

    #[test]
    fn empty_population_is_exact() {
        let mut s = small_spec(4);
        s.points[0].scenario.activity = Activity::Fixed(vec![0, 0, 0]);
        let rows = run_experiment(&s).unwrap();
        assert!(rows.iter().all(|r| r.acc_rate_min == 1.0));
    }
}
