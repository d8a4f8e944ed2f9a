//! Input LC filter sizing and its per-phase series-L, shunt-C simulation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveforms::ThreePhase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("filter parameter `{0}` must be positive and finite")]
    NonPositive(&'static str),
    #[error("cutoff {f_c} Hz is not below the switching frequency {f_sw} Hz")]
    CutoffAboveSwitching { f_c: f64, f_sw: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub c_f: f64,
    pub l_f: f64,
    pub f_c: f64,
    pub p_rating: f64,
    pub v_m: f64,
    pub omega_i: f64,
}

fn positive(name: &'static str, v: f64) -> Result<(), FilterError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(FilterError::NonPositive(name))
    }
}

/// `C_f = 2P/(3·V_m²·ω_i)`, `L_f = 1/((2π f_c)²·C_f)`.
pub fn design_input_filter(p: f64, v_m: f64, omega_i: f64, f_c: f64) -> Result<FilterDesign, FilterError> {
    positive("p", p)?;
    positive("v_m", v_m)?;
    positive("omega_i", omega_i)?;
    positive("f_c", f_c)?;
    let c_f = 2.0 * p / (3.0 * v_m * v_m * omega_i);
    let w_c = TAU * f_c;
    let l_f = 1.0 / (w_c * w_c * c_f);
    Ok(FilterDesign {
        c_f,
        l_f,
        f_c,
        p_rating: p,
        v_m,
        omega_i,
    })
}

impl FilterDesign {
    pub fn check_switching(&self, f_sw: f64) -> Result<(), FilterError> {
        positive("f_sw", f_sw)?;
        if self.f_c >= f_sw {
            return Err(FilterError::CutoffAboveSwitching { f_c: self.f_c, f_sw });
        }
        Ok(())
    }

    pub fn resonance_hz(&self) -> f64 {
        1.0 / (TAU * (self.l_f * self.c_f).sqrt())
    }

    pub fn characteristic_impedance(&self) -> f64 {
        (self.l_f / self.c_f).sqrt()
    }

    /// |v_C / v_source| at `f` with no converter current, optionally with a
    /// damping resistor across the inductor.
    pub fn gain(&self, f: f64, damping: Option<f64>) -> f64 {
        let w = TAU * f;
        let lc = 1.0 - w * w * self.l_f * self.c_f;
        match damping {
            // (R + jωL) / (R(1 − ω²LC) + jωL)
            Some(r) => (r.hypot(w * self.l_f)) / ((r * lc).hypot(w * self.l_f)),
            None => 1.0 / lc.abs(),
        }
    }
}

/// Inductor currents and capacitor voltages per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub i_l: ThreePhase,
    pub v_c: ThreePhase,
}

impl FilterState {
    /// Capacitors charged to `v`, inductors idle.
    pub fn charged(v: ThreePhase) -> Self {
        Self {
            i_l: ThreePhase::ZERO,
            v_c: v,
        }
    }

    pub fn stored_energy(&self, d: &FilterDesign) -> f64 {
        0.5 * d.l_f * self.i_l.dot(&self.i_l) + 0.5 * d.c_f * self.v_c.dot(&self.v_c)
    }
}

/// Trapezoidal step of `L di/dt = v_s − v_c`,
/// `C dv/dt = i + (v_s − v_c)/R_d − i_conv`, with the optional damping
/// resistor `R_d` across each inductor, and source voltage and converter
/// current held over `dt`. Returns the terminal (capacitor) voltage, the
/// source current and the updated state.
pub fn step_input_filter(
    d: &FilterDesign,
    damping: Option<f64>,
    source_v: ThreePhase,
    converter_i: ThreePhase,
    state: &FilterState,
    dt: f64,
) -> (ThreePhase, ThreePhase, FilterState) {
    let a = 0.5 * dt / d.l_f;
    let b = 0.5 * dt / d.c_f;
    let g = damping.map_or(0.0, |r| 1.0 / r);
    // (I − hA/2) x' = (I + hA/2) x + h·B·u, with A = [[0, −1/L], [1/C, −g/C]]
    let (m11, m12, m21, m22) = (1.0, a, -b, 1.0 + b * g);
    let det = m11 * m22 - m12 * m21;
    let (i0, v0) = (state.i_l.to_array(), state.v_c.to_array());
    let (vs, ic) = (source_v.to_array(), converter_i.to_array());
    let mut i1 = [0.0; 3];
    let mut v1 = [0.0; 3];
    let mut is = [0.0; 3];
    for k in 0..3 {
        let r1 = i0[k] - a * v0[k] + 2.0 * a * vs[k];
        let r2 = v0[k] + b * i0[k] - b * g * v0[k] + 2.0 * b * (g * vs[k] - ic[k]);
        i1[k] = (m22 * r1 - m12 * r2) / det;
        v1[k] = (m11 * r2 - m21 * r1) / det;
        is[k] = i1[k] + g * (vs[k] - v1[k]);
    }
    let next = FilterState {
        i_l: ThreePhase::from_array(i1),
        v_c: ThreePhase::from_array(v1),
    };
    (next.v_c, ThreePhase::from_array(is), next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> FilterDesign {
        design_input_filter(5000.0, 311.0, TAU * 60.0, 2000.0).unwrap()
    }

    #[test]
    fn worked_example() {
        let d = design();
        let c = 2.0 * 5000.0 / (3.0 * 311.0 * 311.0 * TAU * 60.0);
        assert!((d.c_f - c).abs() < 1e-18);
        assert!((d.resonance_hz() - 2000.0).abs() / 2000.0 < 1e-12);
    }

    #[test]
    fn power_scaling() {
        let a = design();
        let b = design_input_filter(20_000.0, 311.0, TAU * 60.0, 2000.0).unwrap();
        assert!((b.c_f / a.c_f - 4.0).abs() < 1e-12);
        assert!((b.l_f / a.l_f - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(design_input_filter(0.0, 311.0, 377.0, 2000.0).is_err());
        assert!(design_input_filter(1.0, f64::NAN, 377.0, 2000.0).is_err());
        assert!(design().check_switching(16_000.0).is_ok());
        assert!(matches!(
            design().check_switching(1500.0),
            Err(FilterError::CutoffAboveSwitching { .. })
        ));
    }

    #[test]
    fn dc_steady_state_passes_source() {
        let d = design();
        let v = ThreePhase::new(100.0, -30.0, -70.0);
        let st = FilterState::charged(v);
        let (vt, is, _) = step_input_filter(&d, None, v, ThreePhase::ZERO, &st, 1e-6);
        assert!((vt - v).to_array().iter().all(|e| e.abs() < 1e-9));
        assert!(is.to_array().iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn undriven_energy_never_grows() {
        let d = design();
        for damping in [None, Some(5.0)] {
            let mut st = FilterState {
                i_l: ThreePhase::new(2.0, -1.0, -1.0),
                v_c: ThreePhase::new(50.0, 0.0, -50.0),
            };
            let mut e = st.stored_energy(&d);
            for _ in 0..5000 {
                st = step_input_filter(&d, damping, ThreePhase::ZERO, ThreePhase::ZERO, &st, 2e-6).2;
                let e1 = st.stored_energy(&d);
                assert!(e1 <= e * (1.0 + 1e-12));
                e = e1;
            }
        }
    }
}
