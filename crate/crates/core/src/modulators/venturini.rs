//! Direct-transfer-function methods: basic and optimum Venturini, and the
//! scalar form with fixed-amplitude injection.

use std::f64::consts::TAU;

use super::{phase_offset, ModulationTarget};
use crate::switchcore::DutyMatrix;

/// `m_kj = 1/3·(1 + 2·v_k·v_j/v_im² + injection_k)` for output targets `v_j`.
fn direct_duty(target: &ModulationTarget, t: f64, v_out: [f64; 3], injection: [f64; 3]) -> DutyMatrix {
    let v_in = target.input_voltages(t).to_array();
    let inv = 1.0 / (target.v_im * target.v_im);
    let mut m = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            m[k][j] = (1.0 + 2.0 * v_in[k] * v_out[j] * inv + injection[k]) / 3.0;
        }
    }
    DutyMatrix::new(m, target.t_seq)
}

pub fn venturini_basic(target: &ModulationTarget, t: f64) -> DutyMatrix {
    direct_duty(target, t, target.output_reference(t).to_array(), [0.0; 3])
}

/// Output target with third-harmonic common-mode of output and input
/// frequencies: `q·v_im·[cos θ_o − cos(3θ_o)/6 + cos(3θ_i)/(2√3)]`.
fn injected_target(target: &ModulationTarget, t: f64) -> [f64; 3] {
    let th_o = target.output_angle(t);
    let th_i = target.input_angle(t);
    let amp = target.q * target.v_im;
    let cm = amp * (-(3.0 * th_o).cos() / 6.0 + (3.0 * th_i).cos() / (2.0 * 3f64.sqrt()));
    let mut v = [0.0; 3];
    for (j, vj) in v.iter_mut().enumerate() {
        *vj = amp * (th_o - j as f64 * TAU / 3.0).cos() + cm;
    }
    v
}

/// `sin(θ_i + β_k)·sin(3θ_i)` per input phase, `β_k` the phase angle of input `k`.
fn injection_shape(target: &ModulationTarget, t: f64) -> [f64; 3] {
    let th_i = target.input_angle(t);
    let s3 = (3.0 * th_i).sin();
    [0, 1, 2].map(|k| (th_i + phase_offset(k)).sin() * s3)
}

pub fn venturini_optimum(target: &ModulationTarget, t: f64) -> DutyMatrix {
    let coeff = 4.0 * target.q / (3.0 * 3f64.sqrt());
    let inj = injection_shape(target, t).map(|x| coeff * x);
    direct_duty(target, t, injected_target(target, t), inj)
}

/// Same as [`venturini_optimum`] but with the injection amplitude fixed at
/// 2/3 instead of scaling with `q`; identical at `q = √3/2`.
pub fn scalar_mod(target: &ModulationTarget, t: f64) -> DutyMatrix {
    let inj = injection_shape(target, t).map(|x| 2.0 / 3.0 * x);
    direct_duty(target, t, injected_target(target, t), inj)
}
