//! Fictitious-DC-link modulation: the rectifier always connects the most
//! positive and most negative inputs to the link, and a carrier-based
//! inverter with min-max injection drives the outputs. Above the linear
//! range the inverter reference is scaled up until the clamped waveform's
//! fundamental matches the request, ending in six-step.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{indirect_limit, MethodId, ModulationError, ModulationTarget, SQRT3_2};
use crate::switchcore::DutyMatrix;

const CAL_POINTS: usize = 400;
const CAL_MAX_GAIN: f64 = 1e4;
const QUAD_POINTS: usize = 3600;

struct Calibration {
    /// Normalized reference amplitude.
    a: Vec<f64>,
    /// Fundamental of the clamped phase-to-star leg waveform.
    f: Vec<f64>,
    /// Six-step fundamental.
    f_max: f64,
}

/// Min-max-injected unit reference for phase a at angle `th`.
fn injected_unit(th: f64, j: usize) -> f64 {
    let w = [0, 1, 2].map(|k| (th - k as f64 * 2.0 * PI / 3.0).cos());
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    w[j] - 0.5 * (hi + lo)
}

fn leg(a: Option<f64>, w: f64) -> f64 {
    match a {
        Some(a) => (0.5 + a * w).clamp(0.0, 1.0),
        None => step(w),
    }
}

fn step(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Fundamental amplitude of `(s_a − mean s)` over one cycle; `None` is six-step.
fn fundamental(a: Option<f64>) -> f64 {
    let h = 2.0 * PI / QUAD_POINTS as f64;
    let mut acc = 0.0;
    for i in 0..QUAD_POINTS {
        let th = (i as f64 + 0.5) * h;
        let s = [0, 1, 2].map(|j| leg(a, injected_unit(th, j)));
        let v = s[0] - (s[0] + s[1] + s[2]) / 3.0;
        acc += v * th.cos();
    }
    acc * 2.0 / QUAD_POINTS as f64
}

fn calibration() -> &'static Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    CAL.get_or_init(|| {
        let a0 = 1.0 / 3f64.sqrt();
        let ratio = (CAL_MAX_GAIN / a0).ln() / (CAL_POINTS - 1) as f64;
        let a: Vec<f64> = (0..CAL_POINTS).map(|i| a0 * (ratio * i as f64).exp()).collect();
        let mut f: Vec<f64> = a.iter().map(|&x| fundamental(Some(x))).collect();
        // Below a0 nothing clamps and F(a) = a exactly.
        f[0] = a0;
        for i in 1..f.len() {
            f[i] = f[i].max(f[i - 1]);
        }
        Calibration {
            a,
            f,
            f_max: fundamental(None),
        }
    })
}

/// Mean link voltage over `v_im`: 3√3/π.
fn mean_link_ratio() -> f64 {
    3.0 * 3f64.sqrt() / PI
}

/// Inverter reference gain for ratio `q`: 1 in the linear range, `∞` for
/// six-step, `None` when `q` is beyond reach.
pub fn overmodulation_gain(q: f64) -> Option<f64> {
    if q <= SQRT3_2 {
        return Some(1.0);
    }
    let cal = calibration();
    let r = q / mean_link_ratio();
    let a0 = cal.a[0];
    if r <= a0 {
        return Some(1.0);
    }
    let last = *cal.f.last().unwrap();
    if r > last {
        return if r <= cal.f_max * (1.0 + 1e-12) {
            Some(f64::INFINITY)
        } else {
            None
        };
    }
    let i = cal.f.partition_point(|&f| f < r).max(1);
    let (f0, f1) = (cal.f[i - 1], cal.f[i]);
    let w = if f1 > f0 { (r - f0) / (f1 - f0) } else { 0.0 };
    let a = cal.a[i - 1] + w * (cal.a[i] - cal.a[i - 1]);
    Some(a / r)
}

/// Largest reachable ratio, from the six-step fundamental.
pub(super) fn reachable_limit() -> f64 {
    calibration().f_max * mean_link_ratio()
}

pub fn indirect_mod_unchecked(target: &ModulationTarget, t: f64) -> Result<DutyMatrix, ModulationError> {
    let gain = overmodulation_gain(target.q).ok_or(ModulationError::AboveLimit {
        method: MethodId::Indirect,
        q: target.q,
        limit: reachable_limit(),
    })?;
    let v = target.input_voltages(t).to_array();
    let p = (0..3).fold(0, |b, k| if v[k] > v[b] { k } else { b });
    let n = (0..3).fold(0, |b, k| if v[k] < v[b] { k } else { b });
    let v_dc = v[p] - v[n];

    let r = target.output_reference(t).to_array();
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        let u = r[j] - 0.5 * (hi + lo);
        let s = if gain.is_infinite() {
            step(u)
        } else {
            (0.5 + gain * u / v_dc).clamp(0.0, 1.0)
        };
        m[p][j] += s;
        m[n][j] += 1.0 - s;
    }
    Ok(DutyMatrix::new(m, target.t_seq))
}

pub fn indirect_mod(target: &ModulationTarget, t: f64) -> Result<DutyMatrix, ModulationError> {
    let limit = indirect_limit();
    if target.q > limit + 1e-12 {
        return Err(ModulationError::AboveLimit {
            method: MethodId::Indirect,
            q: target.q,
            limit,
        });
    }
    indirect_mod_unchecked(target, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switchcore::validate_duty;
    use std::f64::consts::TAU;

    fn target(q: f64) -> ModulationTarget {
        ModulationTarget::new(q, TAU * 30.0, 0.0, 100.0, TAU * 60.0, 0.0, 1e-4).unwrap()
    }

    #[test]
    fn six_step_fundamental() {
        assert!((calibration().f_max - 2.0 / PI).abs() < 1e-6);
        assert!((reachable_limit() - indirect_limit()).abs() < 1e-6);
    }

    #[test]
    fn linear_range_is_exact() {
        let tg = target(SQRT3_2);
        for i in 0..500 {
            let t = i as f64 * 6.1e-5;
            let d = indirect_mod(&tg, t).unwrap();
            assert!(validate_duty(&d).is_ok());
            let out = d.average_output(tg.input_voltages(t)).without_common_mode();
            let want = tg.output_reference(t);
            assert!((out - want).to_array().iter().all(|e| e.abs() < 1e-9));
        }
    }

    #[test]
    fn gain_is_monotone_and_continuous() {
        assert_eq!(overmodulation_gain(0.5), Some(1.0));
        let g0 = overmodulation_gain(SQRT3_2 + 1e-9).unwrap();
        assert!((g0 - 1.0).abs() < 1e-3);
        let mut prev = g0;
        for i in 1..50 {
            let q = SQRT3_2 + (indirect_limit() - SQRT3_2) * i as f64 / 50.0;
            let g = overmodulation_gain(q).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert!(overmodulation_gain(indirect_limit()).unwrap() > 100.0);
        assert!(overmodulation_gain(indirect_limit() * 1.001).is_none());
        assert!(indirect_mod(&target(1.06), 0.0).is_err());
    }

    #[test]
    fn overmodulated_duty_is_valid() {
        let tg = target(1.0);
        for i in 0..300 {
            assert!(validate_duty(&indirect_mod(&tg, i as f64 * 1.1e-4).unwrap()).is_ok());
        }
    }
}
