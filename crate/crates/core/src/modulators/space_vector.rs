//! Indirect space-vector modulation: a unity-displacement-factor current
//! rectifier feeding a fictitious DC link, and a two-level voltage inverter
//! stage, composed into one 3×3 duty matrix.

use std::f64::consts::{FRAC_PI_3, TAU};

use super::{max_ratio, MethodId, ModulationError, ModulationTarget};
use crate::switchcore::DutyMatrix;

/// Inverter leg states of the six active vectors, in angular order.
const ACTIVE: [[u8; 3]; 6] = [[1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1], [1, 0, 1]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmTimes {
    /// Input phase held on one rail for the whole period.
    pub clamped_input: usize,
    /// Whether that rail is the positive one.
    pub clamped_positive: bool,
    /// Period-average fictitious link voltage.
    pub link_voltage: f64,
    /// Rectifier split: fraction of the period each input spends on p / n.
    pub rail_p: [f64; 3],
    pub rail_n: [f64; 3],
    pub sector: usize,
    pub alpha: f64,
    pub modulation_index: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
    pub d_zero: f64,
    /// Per-leg fraction of the period on the p rail.
    pub leg_duty: [f64; 3],
}

pub fn svm_vector_times(target: &ModulationTarget, t: f64) -> SvmTimes {
    let v = target.input_voltages(t).to_array();
    let mut ks = 0;
    for k in 1..3 {
        if v[k].abs() > v[ks].abs() {
            ks = k;
        }
    }
    let vk = v[ks];
    let positive = vk >= 0.0;
    let mut split = [0.0; 3];
    for l in 0..3 {
        if l != ks {
            split[l] = -v[l] / vk;
        }
    }
    let mut single = [0.0; 3];
    single[ks] = 1.0;
    let (rail_p, rail_n) = if positive { (single, split) } else { (split, single) };
    let v_sq: f64 = v.iter().map(|x| x * x).sum();
    let link_voltage = v_sq / vk.abs();

    let amp = target.q * target.v_im;
    let theta = target.output_angle(t).rem_euclid(TAU);
    let sector = ((theta / FRAC_PI_3) as usize).min(5);
    let alpha = theta - sector as f64 * FRAC_PI_3;
    let m = 3f64.sqrt() * amp / link_voltage;
    let d_alpha = m * (FRAC_PI_3 - alpha).sin();
    let d_beta = m * alpha.sin();
    let d_zero = 1.0 - d_alpha - d_beta;
    // The zero vector ties every output to the single-input rail.
    let zero_leg = if positive { 1.0 } else { 0.0 };
    let (va, vb) = (ACTIVE[sector], ACTIVE[(sector + 1) % 6]);
    let mut leg_duty = [0.0; 3];
    for j in 0..3 {
        leg_duty[j] = d_alpha * va[j] as f64 + d_beta * vb[j] as f64 + d_zero * zero_leg;
    }
    SvmTimes {
        clamped_input: ks,
        clamped_positive: positive,
        link_voltage,
        rail_p,
        rail_n,
        sector,
        alpha,
        modulation_index: m,
        d_alpha,
        d_beta,
        d_zero,
        leg_duty,
    }
}

/// `m_kj = s_j·R_p[k] + (1 − s_j)·R_n[k]`; cells leave [0, 1] when the
/// requested vector lies outside the inverter hexagon.
pub fn svm_mod_unchecked(target: &ModulationTarget, t: f64) -> DutyMatrix {
    let st = svm_vector_times(target, t);
    let mut m = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            let s = st.leg_duty[j];
            m[k][j] = s * st.rail_p[k] + (1.0 - s) * st.rail_n[k];
        }
    }
    DutyMatrix::new(m, target.t_seq)
}

pub fn svm_mod(target: &ModulationTarget, t: f64) -> Result<DutyMatrix, ModulationError> {
    let limit = max_ratio(MethodId::Svm);
    if target.q > limit + 1e-12 {
        return Err(ModulationError::AboveLimit {
            method: MethodId::Svm,
            q: target.q,
            limit,
        });
    }
    Ok(svm_mod_unchecked(target, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulators::SQRT3_2;
    use crate::switchcore::validate_duty;

    fn target(q: f64) -> ModulationTarget {
        ModulationTarget::new(q, TAU * 30.0, 0.4, 100.0, TAU * 60.0, 0.0, 1e-4).unwrap()
    }

    #[test]
    fn rectifier_link_is_at_least_one_and_a_half_peak() {
        let tg = target(0.5);
        for i in 0..997 {
            let st = svm_vector_times(&tg, i as f64 * 1.7e-5);
            assert!(st.link_voltage >= 150.0 - 1e-9);
            assert!(st.link_voltage <= 100.0 * 3f64.sqrt() + 1e-9);
            assert!((st.rail_p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((st.rail_n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(st.rail_p.iter().chain(st.rail_n.iter()).all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn input_current_is_in_phase_with_voltage() {
        // For a constant link current, i_k ∝ R_p[k] − R_n[k] must be ∝ v_k.
        let tg = target(0.5);
        for i in 0..200 {
            let t = i as f64 * 7.1e-5;
            let st = svm_vector_times(&tg, t);
            let v = tg.input_voltages(t).to_array();
            let i_in: Vec<f64> = (0..3).map(|k| st.rail_p[k] - st.rail_n[k]).collect();
            let ratio = i_in[st.clamped_input] / v[st.clamped_input];
            for k in 0..3 {
                assert!((i_in[k] - ratio * v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn averaged_output_tracks_reference() {
        let tg = target(0.8);
        for i in 0..500 {
            let t = i as f64 * 3.3e-5;
            let d = svm_mod(&tg, t).unwrap();
            assert!(validate_duty(&d).is_ok());
            let out = d.average_output(tg.input_voltages(t)).without_common_mode();
            let want = tg.output_reference(t);
            assert!(
                (out - want).to_array().iter().all(|e| e.abs() < 1e-9),
                "{out:?} {want:?}"
            );
        }
    }

    #[test]
    fn zero_ratio_clamps_outputs_together() {
        let d = svm_mod(&target(0.0), 0.0013).unwrap();
        for k in 0..3 {
            assert_eq!(d.m[k][0], d.m[k][1]);
            assert_eq!(d.m[k][1], d.m[k][2]);
            assert!(d.m[k][0] == 0.0 || d.m[k][0] == 1.0);
        }
    }

    #[test]
    fn boundary() {
        assert!(svm_mod(&target(SQRT3_2 + 1e-6), 0.0).is_err());
        let tg = target(0.9);
        let bad = (0..1000).any(|i| validate_duty(&svm_mod_unchecked(&tg, i as f64 / 30_000.0)).is_err());
        assert!(bad);
    }
}
