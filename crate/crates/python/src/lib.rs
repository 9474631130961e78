//! Python bindings: configuration, single frames, figure presets and the
//! closed-form thresholds.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hetcard::analysis::{self, ThresholdKind};
use hetcard::config::{derive_config_with, ConfigOverrides, ProtocolConfig};
use hetcard::harness::presets::Preset;
use hetcard::harness::{self, Activity, ExperimentSpec, ResultRow, Scenario, Scheme, SweepPoint};
use hetcard::hsrc::{self, Baseline, Variant};
use hetcard::ledger::EstimateReport;
use hetcard::model::{Phase2Method, PopulationSpec};
use hetcard::rng::Streams;

fn py_err(e: hetcard::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Derived protocol parameters.
#[pyclass(frozen, name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ProtocolConfig,
}

#[pymethods]
impl PyConfig {
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn ell(&self) -> u64 {
        self.inner.ell
    }
    #[getter]
    fn m_prime(&self) -> u32 {
        self.inner.m_prime
    }
    #[getter]
    fn m_lof(&self) -> u32 {
        self.inner.m_lof
    }
    #[getter]
    fn blocks(&self) -> u32 {
        self.inner.blocks
    }
    #[getter]
    fn slot_width(&self) -> u32 {
        self.inner.slot_width
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(epsilon={}, delta={}, ell={}, m_prime={}, m_lof={}, blocks={}, slot_width={})",
            c.epsilon, c.delta, c.ell, c.m_prime, c.m_lof, c.blocks, c.slot_width
        )
    }
}

/// Slot counts and estimates of one frame.
#[pyclass(frozen, name = "Report", get_all)]
struct PyReport {
    rough: Vec<f64>,
    estimates: Vec<f64>,
    phase2_method: Option<String>,
    stage1: u64,
    stage2: u64,
    stage3: u64,
    bp: u64,
    overhead: u64,
    total: u64,
    protocol_total: u64,
    phase2_slots: u64,
    energy_per_type: Vec<f64>,
    saturated: Vec<bool>,
}

impl PyReport {
    fn new(r: EstimateReport) -> Self {
        let l = r.ledger;
        PyReport {
            energy_per_type: r.energy.mean_per_type(r.types()),
            rough: r.rough,
            estimates: r.estimates,
            phase2_method: r.phase2_method.map(|m| m.to_string()),
            stage1: l.stage1,
            stage2: l.stage2,
            stage3: l.stage3,
            bp: l.bp,
            overhead: l.overhead,
            total: l.total,
            protocol_total: l.protocol_total(),
            phase2_slots: r.phase2_ledger.total,
            saturated: r.saturated,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        let method = match &self.phase2_method {
            Some(m) => format!("'{m}'"),
            None => "None".into(),
        };
        format!(
            "Report(estimates={:?}, total={}, phase2_method={method})",
            self.estimates, self.total
        )
    }
}

/// Parameters for `epsilon`, `delta` and the manufactured counts.
#[pyfunction]
#[pyo3(signature = (epsilon, delta=0.2, manufactured=vec![1_000_000, 1_000_000], slot_width=6, ell=None, m_prime=None))]
fn derive_config(
    epsilon: f64,
    delta: f64,
    manufactured: Vec<u64>,
    slot_width: u32,
    ell: Option<u64>,
    m_prime: Option<u32>,
) -> PyResult<PyConfig> {
    let overrides = ConfigOverrides {
        ell,
        m_prime,
        ..Default::default()
    };
    derive_config_with(epsilon, delta, &manufactured, slot_width, overrides)
        .map(|inner| PyConfig { inner })
        .map_err(py_err)
}

fn population(counts: Vec<u64>, manufactured: u64) -> PyResult<PopulationSpec> {
    PopulationSpec::with_common_total(counts, manufactured).map_err(py_err)
}

fn parse_phase2(name: Option<&str>) -> PyResult<Option<Phase2Method>> {
    match name {
        None => Ok(None),
        Some("TRepBB") => Ok(Some(Phase2Method::TRepBB)),
        Some("SSBB") => Ok(Some(Phase2Method::SSBB)),
        Some(other) => Err(PyValueError::new_err(format!(
            "unknown phase-2 method `{other}`; use TRepBB or SSBB"
        ))),
    }
}

/// One frame of HSRC-1 (`variant=1`) or HSRC-2 (`variant=2`).
#[pyfunction]
#[pyo3(signature = (variant, counts, config, seed=0, phase2=None, manufactured=1_000_000))]
fn run_hsrc(
    variant: u8,
    counts: Vec<u64>,
    config: &PyConfig,
    seed: u64,
    phase2: Option<&str>,
    manufactured: u64,
) -> PyResult<PyReport> {
    let variant = match variant {
        1 => Variant::Hsrc1,
        2 => Variant::Hsrc2,
        v => {
            return Err(PyValueError::new_err(format!(
                "variant must be 1 or 2, got {v}"
            )))
        }
    };
    let pop = population(counts, manufactured)?;
    hsrc::run_hsrc(
        variant,
        &pop,
        &config.inner,
        &Streams::new(seed),
        parse_phase2(phase2)?,
    )
    .map(PyReport::new)
    .map_err(py_err)
}

/// One frame of a baseline: "3SS", "2SS" or "TxSRCS".
#[pyfunction]
#[pyo3(signature = (scheme, counts, config, seed=0, manufactured=1_000_000))]
fn run_baseline(
    scheme: &str,
    counts: Vec<u64>,
    config: &PyConfig,
    seed: u64,
    manufactured: u64,
) -> PyResult<PyReport> {
    let scheme: Baseline = scheme.parse().map_err(py_err)?;
    let pop = population(counts, manufactured)?;
    hsrc::run_baseline(scheme, &pop, &config.inner, &Streams::new(seed))
        .map(PyReport::new)
        .map_err(py_err)
}

fn row_dict<'py>(py: Python<'py>, r: &ResultRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sweep_var", &r.sweep_var)?;
    d.set_item("sweep_value", &r.sweep_value)?;
    d.set_item("scheme", &r.scheme)?;
    d.set_item("replicates", r.replicates)?;
    d.set_item("mean_slots", r.mean_slots)?;
    d.set_item("se_slots", r.se_slots)?;
    d.set_item("stage1", r.stage1)?;
    d.set_item("stage2", r.stage2)?;
    d.set_item("stage3", r.stage3)?;
    d.set_item("bp", r.bp)?;
    d.set_item("acc_rate_min", r.acc_rate_min)?;
    d.set_item("energy_mean_per_type", r.energy_mean_per_type.clone())?;
    Ok(d)
}

fn run_rows<'py>(py: Python<'py>, spec: ExperimentSpec) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .detach(|| harness::run_experiment(&spec))
        .map_err(py_err)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Replicated runs of several schemes on one scenario. Give either `counts`
/// or both `nodes_per_type` and `q`.
#[pyfunction]
#[pyo3(signature = (
    schemes, types, epsilon=0.03, counts=None, nodes_per_type=None, q=None,
    replicates=100, seed=1, include_overhead=false
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    schemes: Vec<String>,
    types: usize,
    epsilon: f64,
    counts: Option<Vec<u64>>,
    nodes_per_type: Option<u64>,
    q: Option<f64>,
    replicates: u32,
    seed: u64,
    include_overhead: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let activity = match (counts, nodes_per_type, q) {
        (Some(c), _, _) => Activity::Fixed(c),
        (None, Some(d), Some(q)) => Activity::Binomial {
            nodes_per_type: d,
            q,
        },
        _ => {
            return Err(PyValueError::new_err(
                "give counts, or nodes_per_type and q",
            ))
        }
    };
    let schemes = schemes
        .iter()
        .map(|s| s.parse::<Scheme>())
        .collect::<hetcard::Result<Vec<_>>>()
        .map_err(py_err)?;
    let spec = ExperimentSpec {
        name: "simulate".into(),
        sweep_var: "none".into(),
        points: vec![SweepPoint {
            value: "0".into(),
            series: None,
            scenario: Scenario::new(types, epsilon, activity),
        }],
        schemes,
        replicates,
        seed,
        include_overhead,
    };
    run_rows(py, spec)
}

/// Rows of a slot-count figure preset such as "fig11a".
#[pyfunction]
#[pyo3(signature = (name, replicates=None, seed=1))]
fn figure<'py>(
    py: Python<'py>,
    name: &str,
    replicates: Option<u32>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    match harness::preset(name, replicates, seed).map_err(py_err)? {
        Preset::Experiment(spec) => run_rows(py, spec),
        Preset::Thresholds { .. } => Err(PyValueError::new_err(format!(
            "{name} is a threshold table; use thresholds()"
        ))),
    }
}

/// The lower or upper threshold on `n1 / ell` for `types` types.
#[pyfunction]
#[pyo3(signature = (types, upper=false))]
fn zeta(types: usize, upper: bool) -> PyResult<f64> {
    let kind = if upper {
        ThresholdKind::Upper
    } else {
        ThresholdKind::Lower
    };
    analysis::zeta(types, kind).map_err(py_err)
}

/// Threshold rows as dicts. Simulated crossovers only when `replicates` is set.
#[pyfunction]
#[pyo3(signature = (t_min=2, t_max=8, ell=3009, others=1.6, replicates=None, seed=1))]
fn thresholds<'py>(
    py: Python<'py>,
    t_min: usize,
    t_max: usize,
    ell: u64,
    others: f64,
    replicates: Option<u32>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .detach(|| harness::threshold_table(t_min..=t_max, &[ell], others, replicates, seed))
        .map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("T", r.types)?;
            d.set_item("ell", r.ell)?;
            d.set_item("others_ratio", r.others_ratio)?;
            d.set_item("zeta1", r.zeta1)?;
            d.set_item("zeta2", r.zeta2)?;
            d.set_item("n1_star_analytic", r.crossover_analytic)?;
            d.set_item("n1_star_empirical", r.crossover_empirical)?;
            Ok(d)
        })
        .collect()
}

/// Expected flagged and stage-3 block counts of 3-SS-BB, rough estimates equal to `n`.
#[pyfunction]
fn expected_k_r(n: Vec<f64>, ell: u64) -> (f64, f64) {
    analysis::expected_k_r(&n, &n, ell)
}

/// Expected 3-SS-BB length in slots, rough estimates equal to `n`.
#[pyfunction]
#[pyo3(signature = (n, ell, slot_width=6))]
fn expected_3ssbb_slots(n: Vec<f64>, ell: u64, slot_width: u32) -> f64 {
    analysis::lambda_ii(&n, &n, ell, slot_width)
}

#[pymodule]
fn pyhetcard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(derive_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_hsrc, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(expected_k_r, m)?)?;
    m.add_function(wrap_pyfunction!(expected_3ssbb_slots, m)?)?;
    Ok(())
}
