//! Protocol parameters and their derivation from accuracy targets.

use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};

/// Trial length needed by the balls-and-bins phase for each tabulated epsilon.
pub const ELL_TABLE: [(f64, u64); 4] = [(0.02, 6638), (0.03, 3009), (0.04, 1674), (0.05, 1075)];

/// Phase-1 repetition count for each tabulated delta.
pub const M_PRIME_TABLE: [(f64, u32); 1] = [(0.2, 10)];

/// Scale factor applied to `erf_inv` in the LoF repetition-count formula.
pub const LOF_SPREAD: f64 = 1.1213;

pub const DEFAULT_SLOT_WIDTH: u32 = 6;

const KEY_TOLERANCE: f64 = 1e-9;

/// Per-slot energy spent by a node in each radio state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCosts {
    pub transmit: f64,
    pub receive: f64,
    pub idle: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        EnergyCosts {
            transmit: 1.0,
            receive: 0.5,
            idle: 0.05,
        }
    }
}

impl EnergyCosts {
    pub fn uniform(gamma: f64) -> Self {
        EnergyCosts {
            transmit: gamma,
            receive: gamma,
            idle: gamma,
        }
    }

    pub fn energy(&self, tx: f64, rx: f64, idle: f64) -> f64 {
        tx * self.transmit + rx * self.receive + idle * self.idle
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Balls-and-bins trial length in slots.
    pub ell: u64,
    /// Phase-1 trial count.
    pub m_prime: u32,
    /// LoF trial count needed for standalone accuracy.
    pub m_lof: u32,
    /// Stage-1 block count, `ceil(log2(max manufactured))`.
    pub blocks: u32,
    /// Slot width in bits.
    pub slot_width: u32,
    pub energy: EnergyCosts,
}

/// Values that replace table lookups in [`derive_config_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub ell: Option<u64>,
    pub m_prime: Option<u32>,
    pub m_lof: Option<u32>,
}

fn lookup<V: Copy>(table: &[(f64, V)], key: f64) -> Option<V> {
    table
        .iter()
        .find(|(k, _)| (k - key).abs() < KEY_TOLERANCE)
        .map(|&(_, v)| v)
}

pub fn ell_for_epsilon(epsilon: f64) -> Result<u64> {
    lookup(&ELL_TABLE, epsilon).ok_or(Error::UnknownAccuracyKey {
        param: "ell",
        key: "epsilon",
        value: epsilon,
    })
}

pub fn m_prime_for_delta(delta: f64) -> Result<u32> {
    lookup(&M_PRIME_TABLE, delta).ok_or(Error::UnknownAccuracyKey {
        param: "m_prime",
        key: "delta",
        value: delta,
    })
}

/// `sqrt(2) * erf_inv(1 - delta)`, the two-sided normal quantile at `delta`.
pub fn normal_quantile(delta: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(1.0 - delta)
}

/// LoF trials needed so that the estimate lies within `epsilon` with probability `1 - delta`.
pub fn lof_repetitions(epsilon: f64, delta: f64) -> u32 {
    let c = normal_quantile(delta);
    let lower = (-LOF_SPREAD * c / (1.0 - epsilon).log2()).powi(2);
    let upper = (LOF_SPREAD * c / (1.0 + epsilon).log2()).powi(2);
    lower.max(upper).ceil() as u32
}

/// `ceil(log2(n))`, clamped to at least one.
pub fn blocks_for(manufactured: u64) -> u32 {
    if manufactured <= 2 {
        return 1;
    }
    64 - (manufactured - 1).leading_zeros()
}

/// Ceiling division used for broadcast-packet slot costs.
pub fn ceil_div(bits: u64, width: u32) -> u64 {
    bits.div_ceil(width as u64)
}

pub fn derive_config(
    epsilon: f64,
    delta: f64,
    manufactured: &[u64],
    slot_width: u32,
) -> Result<ProtocolConfig> {
    derive_config_with(
        epsilon,
        delta,
        manufactured,
        slot_width,
        ConfigOverrides::default(),
    )
}

pub fn derive_config_with(
    epsilon: f64,
    delta: f64,
    manufactured: &[u64],
    slot_width: u32,
    overrides: ConfigOverrides,
) -> Result<ProtocolConfig> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", format!("{delta} not in (0, 1)")));
    }
    if slot_width == 0 {
        return Err(Error::config("slot_width", "must be at least 1"));
    }
    let max_total = *manufactured
        .iter()
        .max()
        .ok_or(Error::EmptyInput("manufactured counts"))?;
    let ell = match overrides.ell {
        Some(v) => v,
        None => ell_for_epsilon(epsilon)?,
    };
    let m_prime = match overrides.m_prime {
        Some(v) => v,
        None => m_prime_for_delta(delta)?,
    };
    if ell == 0 {
        return Err(Error::config("ell", "must be at least 1"));
    }
    if m_prime == 0 {
        return Err(Error::config("m_prime", "must be at least 1"));
    }
    let m_lof = overrides
        .m_lof
        .unwrap_or_else(|| lof_repetitions(epsilon, delta));
    Ok(ProtocolConfig {
        epsilon,
        delta,
        ell,
        m_prime,
        m_lof: m_lof.max(1),
        blocks: blocks_for(max_total),
        slot_width,
        energy: EnergyCosts::default(),
    })
}

impl ProtocolConfig {
    pub fn with_energy(mut self, energy: EnergyCosts) -> Self {
        self.energy = energy;
        self
    }

    /// Participation probability `min(1, 1.6 * ell / rough)`.
    pub fn participation(&self, rough: f64) -> f64 {
        participation(self.ell, rough)
    }
}

pub fn participation(ell: u64, rough: f64) -> f64 {
    if rough <= 0.0 {
        return 1.0;
    }
    (1.6 * ell as f64 / rough).min(1.0)
}
