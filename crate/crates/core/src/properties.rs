use std::f64::consts::TAU;

use crate::dqfuzzy::{abc_to_dq0, dq0_to_abc, FuzzyController, RuleBase};
use crate::filterdesign::design_input_filter;
use crate::loads::{rl_interval, RLParams};
use crate::modulators::{duty, max_ratio, SQRT3_2};
use crate::switchcore::{sequence_with, validate_duty, DutyMatrix, Sequencing};
use crate::waveforms::{spectrum, thd, three_phase_at, TimeGrid};
use crate::{MethodId, ModulationTarget, ThreePhase};
use proptest::prelude::*;

fn method() -> impl Strategy<Value = MethodId> {
    prop::sample::select(MethodId::ALL.to_vec())
}

fn target(q: f64, f_o: f64, phi_o: f64, phi_i: f64) -> ModulationTarget {
    ModulationTarget::new(q, TAU * f_o, phi_o, 359.26, TAU * 60.0, phi_i, 1.0 / 16_000.0).unwrap()
}

fn three() -> impl Strategy<Value = ThreePhase> {
    (-500.0..500.0f64, -500.0..500.0f64, -500.0..500.0f64).prop_map(|(a, b, c)| ThreePhase::new(a, b, c))
}

proptest! {
    #[test]
    fn valid_ratios_give_valid_duty(
        m in method(),
        frac in 0.0..1.0f64,
        f_o in 1.0..200.0f64,
        phi_o in -3.2..3.2f64,
        phi_i in -3.2..3.2f64,
        t in 0.0..1.0f64,
    ) {
        let tg = target(frac * max_ratio(m), f_o, phi_o, phi_i);
        let d = duty(m, &tg, t).unwrap();
        prop_assert!(validate_duty(&d).is_ok(), "{:?}", d);
        for j in 0..3 {
            prop_assert!((d.column_sum(j) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn averaged_line_voltages_track_reference(
        m in prop::sample::select(vec![
            MethodId::VenturiniBasic, MethodId::VenturiniOptimum, MethodId::Scalar, MethodId::Svm, MethodId::Indirect,
        ]),
        frac in 0.0..1.0f64,
        f_o in 1.0..200.0f64,
        phi_o in -3.2..3.2f64,
        t in 0.0..1.0f64,
    ) {
        // every method is exact in the linear range
        let q = frac * max_ratio(m).min(SQRT3_2);
        let tg = target(q, f_o, phi_o, 0.0);
        let avg = duty(m, &tg, t).unwrap().average_output(tg.input_voltages(t));
        let r = tg.output_reference(t);
        for (j, k) in [(0, 1), (1, 2), (2, 0)] {
            let got = avg.get(j) - avg.get(k);
            let want = r.get(j) - r.get(k);
            prop_assert!((got - want).abs() < 1e-9 * tg.v_im, "{m}: {got} vs {want}");
        }
    }

    #[test]
    fn timeline_dwell_matches_duty(
        raw in prop::array::uniform3(prop::array::uniform3(0.0..1.0f64)),
        symmetric in any::<bool>(),
    ) {
        let mut m = [[0.0; 3]; 3];
        for j in 0..3 {
            let s: f64 = (0..3).map(|k| raw[k][j]).sum::<f64>() + 1e-9;
            for k in 0..3 {
                m[k][j] = raw[k][j] / s;
            }
            m[2][j] = 1.0 - m[0][j] - m[1][j];
        }
        let d = DutyMatrix::new(m, 62.5e-6);
        prop_assume!(validate_duty(&d).is_ok());
        let order = if symmetric { Sequencing::Symmetric } else { Sequencing::Single };
        let tl = sequence_with(&d, order).unwrap();
        let dwell = tl.dwell();
        prop_assert!((tl.total_duration() - d.t_seq).abs() < 1e-15);
        for k in 0..3 {
            for j in 0..3 {
                prop_assert!((dwell[k][j] - m[k][j] * d.t_seq).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rl_interval_composes_and_conserves_energy(
        r in 0.1..50.0f64,
        l in 1e-5..1e-1f64,
        i0 in three(),
        v in three(),
        dt in 1e-7..1e-3f64,
    ) {
        let p = RLParams::new(r, l).unwrap();
        // star-connected, three-wire: phase currents sum to zero
        let i0 = i0.without_common_mode();
        let whole = rl_interval(&p, i0, v, dt);
        let half = rl_interval(&p, i0, v, 0.5 * dt);
        let twice = rl_interval(&p, half.i_end, v, 0.5 * dt);
        let scale = 1.0 + i0.to_array().iter().map(|x| x.abs()).sum::<f64>() + v.to_array().iter().map(|x| x.abs()).sum::<f64>() / r;
        for k in 0..3 {
            prop_assert!((whole.i_end.get(k) - twice.i_end.get(k)).abs() < 1e-10 * scale);
        }
        // applied energy = dissipated + change in stored energy
        let supplied = v.dot(&whole.i_mean) * dt;
        let stored = p.stored_energy(whole.i_end) - p.stored_energy(i0);
        let big = supplied.abs().max(whole.dissipated).max(stored.abs()).max(1e-12);
        prop_assert!((supplied - whole.dissipated - stored).abs() < 1e-9 * big);
    }

    #[test]
    fn dq_round_trip_and_balanced_magnitude(v in three(), wt in -50.0..50.0f64, amp in 0.1..1000.0f64, th in -7.0..7.0f64) {
        let back = dq0_to_abc(abc_to_dq0(v, wt), wt);
        for k in 0..3 {
            prop_assert!((back.get(k) - v.get(k)).abs() < 1e-12 * 500.0);
        }
        let d = abc_to_dq0(three_phase_at(amp, th), wt);
        prop_assert!((d.magnitude() - amp).abs() < 1e-12 * amp);
        prop_assert!(d.v_0.abs() < 1e-12 * amp);
    }

    #[test]
    fn fuzzy_output_is_odd_bounded_and_signed(e in -2.0..2.0f64, ce in -2.0..2.0f64) {
        let c = FuzzyController::new(RuleBase::default(), 1.0, 1.0, 1.0);
        let u = c.output(e, ce);
        prop_assert!((u + c.output(-e, -ce)).abs() < 1e-9);
        prop_assert!(u.abs() <= 1.0);
        if e >= 0.0 && ce >= 0.0 {
            prop_assert!(u >= -1e-12);
        }
    }

    #[test]
    fn filter_resonance_identity(p in 10.0..1e6f64, v_m in 10.0..1e4f64, f_i in 10.0..500.0f64, ratio in 5.0..100.0f64) {
        let f_c = ratio * f_i;
        let d = design_input_filter(p, v_m, TAU * f_i, f_c).unwrap();
        prop_assert!((1.0 / (TAU * (d.l_f * d.c_f).sqrt()) - f_c).abs() < 1e-9 * f_c);
        prop_assert!((d.c_f - 2.0 * p / (3.0 * v_m * v_m * TAU * f_i)).abs() < 1e-12 * d.c_f);
        // above resonance the undamped gain falls monotonically
        prop_assert!(d.gain(3.0 * f_c, None) > d.gain(10.0 * f_c, None));
        prop_assert!(d.gain(10.0 * f_c, Some(d.characteristic_impedance())) < 0.2);
    }

    #[test]
    fn thd_is_scale_invariant(h3 in 0.0..0.5f64, h5 in 0.0..0.5f64, k in 0.01..100.0f64) {
        let f1 = 50.0;
        let grid = TimeGrid::new(1.0 / (f1 * 256.0), 512).unwrap();
        let x: Vec<f64> = grid
            .times()
            .map(|t| (TAU * f1 * t).sin() + h3 * (3.0 * TAU * f1 * t).sin() + h5 * (5.0 * TAU * f1 * t).cos())
            .collect();
        let y: Vec<f64> = x.iter().map(|v| k * v).collect();
        let a = thd(&spectrum(&x, f1, &grid, 20).unwrap()).unwrap();
        let b = thd(&spectrum(&y, f1, &grid, 20).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((a - h3.hypot(h5)).abs() < 1e-9);
    }
}
