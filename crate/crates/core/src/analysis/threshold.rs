//! Threshold functions bounding when 3-SS-BB beats T-Rep-BB, and the
//! resulting phase-2 selection rule.

use crate::config::ProtocolConfig;
use crate::error::{Error, Result};
use crate::model::Phase2Method;

use super::lambda_ii;

const ZETA_UPPER: f64 = 10.0;
const ZETA_TOLERANCE: f64 = 1e-6;
/// Rough type-1 count (in units of `ell`) above which 3-SS-BB never wins.
const SATURATION_RATIO: f64 = 1.6;
/// Slot width assumed by the threshold constants.
const THRESHOLD_SLOT_WIDTH: u32 = 6;

pub fn g1(types: usize) -> f64 {
    let t = types as f64;
    (1.0 + 6.0 * t) - 7.0 * 0.4751f64.powf(t - 1.0)
}

pub fn g2(types: usize) -> f64 {
    let t = types as f64;
    (1.0 + 6.0 * t) - 7.0 * 0.7981f64.powf(t - 1.0)
}

pub fn f(x: f64, types: usize) -> f64 {
    0.366f64.powf(x) * (g1(types) + x * g2(types))
}

pub fn f1(x: f64, types: usize) -> f64 {
    0.3679f64.powf(x) * (g1(types) + x * g2(types) / 0.99)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    /// Below this ratio 3-SS-BB is expected to be faster.
    Lower,
    /// Above this ratio T-Rep-BB is expected to be faster.
    Upper,
}

/// Ratio `x` where the threshold function crosses its level, by bisection.
pub fn zeta(types: usize, kind: ThresholdKind) -> Result<f64> {
    let t = types as f64;
    let (func, level): (fn(f64, usize) -> f64, f64) = match kind {
        ThresholdKind::Lower => (f, 6.0 * t - 3.88),
        ThresholdKind::Upper => (f1, 6.0 * t - 4.0),
    };
    let no_bracket = Error::NoBracket {
        t: types,
        upper: ZETA_UPPER,
    };
    if types < 2 {
        return Err(no_bracket);
    }
    let gap = |x: f64| func(x, types) - level;
    let (mut lo, mut hi) = (0.0, ZETA_UPPER);
    if gap(lo) <= 0.0 || gap(hi) >= 0.0 {
        return Err(no_bracket);
    }
    while hi - lo > ZETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    SSBB,
    TRepBB,
    Indeterminate,
}

/// Threshold rule on the rough type-1 count.
pub fn select_phase2(rough: &[f64], ell: u64, types: usize) -> Result<Selection> {
    let ratio = rough[0] / ell as f64;
    if ratio >= SATURATION_RATIO {
        return Ok(Selection::TRepBB);
    }
    if ratio <= zeta(types, ThresholdKind::Lower)? {
        return Ok(Selection::SSBB);
    }
    if ratio >= zeta(types, ThresholdKind::Upper)? {
        return Ok(Selection::TRepBB);
    }
    Ok(Selection::Indeterminate)
}

fn by_expected_slots(rough: &[f64], config: &ProtocolConfig) -> Phase2Method {
    let rep = rough.len() as f64 * config.ell as f64;
    if lambda_ii(rough, rough, config.ell, config.slot_width) <= rep {
        Phase2Method::SSBB
    } else {
        Phase2Method::TRepBB
    }
}

/// Phase-2 method for the 3-SS based estimator. The threshold rule applies
/// at its native slot width; the undecided band, and other slot widths, fall
/// back to comparing expected slot counts with the rough estimates plugged in.
pub fn choose_phase2_3ss(rough: &[f64], config: &ProtocolConfig) -> Phase2Method {
    if config.slot_width != THRESHOLD_SLOT_WIDTH {
        return by_expected_slots(rough, config);
    }
    match select_phase2(rough, config.ell, rough.len()) {
        Ok(Selection::SSBB) => Phase2Method::SSBB,
        Ok(Selection::TRepBB) => Phase2Method::TRepBB,
        _ => by_expected_slots(rough, config),
    }
}

/// Ratio `n1 / ell` at which the expected 3-SS-BB length equals `T * ell`,
/// with every other type at `others * ell`.
pub fn crossover_ratio(types: usize, ell: u64, slot_width: u32, others: f64) -> Option<f64> {
    let l = ell as f64;
    let excess = |x: f64| {
        let mut n = vec![others * l; types];
        n[0] = x * l;
        lambda_ii(&n, &n, ell, slot_width) - types as f64 * l
    };
    let (mut lo, mut hi) = (1e-3, SATURATION_RATIO);
    if excess(lo) > 0.0 || excess(hi) <= 0.0 {
        return None;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::derive_config;

    #[test]
    fn reference_thresholds() {
        let lower = [0.4932, 0.6286, 0.6213, 0.5897, 0.5548, 0.522, 0.4926];
        let upper = [0.5384, 0.6622, 0.651, 0.6173, 0.5812, 0.5475, 0.5174];
        for t in 2..=8 {
            let a = zeta(t, ThresholdKind::Lower).unwrap();
            let b = zeta(t, ThresholdKind::Upper).unwrap();
            assert!((a - lower[t - 2]).abs() < 5e-4, "T={t} lower {a}");
            assert!((b - upper[t - 2]).abs() < 5e-4, "T={t} upper {b}");
            assert!(a < b);
        }
    }

    #[test]
    fn threshold_functions_decrease() {
        for t in 2..=50 {
            // f1 only decreases from zero while G1 exceeds G2 / 0.99, which stops at T = 12.
            let f1_monotone = g1(t) > g2(t) / 0.99;
            assert_eq!(f1_monotone, t < 12, "T={t}");
            let mut prev_f = f(1e-3, t);
            let mut prev_f1 = f1(1e-3, t);
            for i in 1..=500 {
                let x = i as f64 * 0.01;
                let (a, b) = (f(x, t), f1(x, t));
                assert!(a < prev_f, "T={t} x={x}");
                if f1_monotone {
                    assert!(b < prev_f1, "T={t} x={x}");
                }
                assert!(a <= b);
                prev_f = a;
                prev_f1 = b;
            }
        }
    }

    #[test]
    fn selection_examples() {
        assert_eq!(
            select_phase2(&[1500.0, 1.0, 1.0], 3009, 3).unwrap(),
            Selection::SSBB
        );
        assert_eq!(
            select_phase2(&[4000.0, 1.0, 1.0], 3009, 3).unwrap(),
            Selection::TRepBB
        );
        let mid = 0.645 * 3009.0;
        assert_eq!(
            select_phase2(&[mid, 6018.0, 6018.0], 3009, 3).unwrap(),
            Selection::Indeterminate
        );
        let cfg = derive_config(0.03, 0.2, &[1000; 3], 6).unwrap();
        let rough = [mid, 6018.0, 6018.0];
        let expect = if lambda_ii(&rough, &rough, 3009, 6) <= 9027.0 {
            Phase2Method::SSBB
        } else {
            Phase2Method::TRepBB
        };
        assert_eq!(choose_phase2_3ss(&rough, &cfg), expect);
    }

    #[test]
    fn crossover_between_thresholds() {
        for t in 2..=8 {
            let x = crossover_ratio(t, 3009, 6, 2.0).unwrap();
            let a = zeta(t, ThresholdKind::Lower).unwrap();
            let b = zeta(t, ThresholdKind::Upper).unwrap();
            assert!(a <= x && x <= b, "T={t}: {a} {x} {b}");
        }
    }
}
