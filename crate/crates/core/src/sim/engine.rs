use thiserror::Error;

use super::result::{EnergyAccount, SimResult, Summary, ThdPair, Waveforms};
use super::scenario::{ConfigError, ControlMode, LoadSpec, Scenario};
use crate::dqfuzzy::{CrossCoupledController, CrossCoupledState, Dq0};
use crate::filterdesign::{step_input_filter, FilterDesign, FilterState};
use crate::loads::{LoadModel, LoadState, MotorState};
use crate::modulators::{duty_unchecked, max_ratio, ModulationError, ModulationTarget};
use crate::switchcore::{apply_state, input_current, sequence_with, validate_duty, DutyViolation, SwitchState};
use crate::waveforms::{
    dominant_frequency, phases, pq, spectrum, thd, thd_wideband, three_phase_at, PQSetting, ThreePhase, TimeGrid,
    WaveformError,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Clip and renormalize invalid duty matrices instead of aborting.
    pub allow_overmodulation: bool,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid duty matrix in switching period {period} (t = {time:.6} s): {violation}")]
    DutyViolation {
        period: usize,
        time: f64,
        violation: DutyViolation,
    },
    #[error("switching period {period}: {source}")]
    Modulation { period: usize, source: ModulationError },
    #[error("simulation state became non-finite at t = {time:.6} s")]
    NonFinite { time: f64 },
}

impl SimError {
    /// Process exit code for the CLI: 2 configuration, 3 duty validity.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::DutyViolation { .. } | SimError::Modulation { .. } => 3,
            SimError::NonFinite { .. } => 1,
        }
    }
}

#[derive(Default)]
struct Cell {
    time: f64,
    in_v: ThreePhase,
    in_i: ThreePhase,
    out_v: ThreePhase,
    out_i: ThreePhase,
}

impl Cell {
    fn add(&mut self, dt: f64, in_v: ThreePhase, in_i: ThreePhase, out_v: ThreePhase, out_i: ThreePhase) {
        self.time += dt;
        self.in_v = self.in_v + in_v * dt;
        self.in_i = self.in_i + in_i * dt;
        self.out_v = self.out_v + out_v * dt;
        self.out_i = self.out_i + out_i * dt;
    }

    fn flush(&mut self, w: &mut Waveforms) {
        let k = if self.time > 0.0 { 1.0 / self.time } else { 0.0 };
        w.in_v.push(self.in_v * k);
        w.in_i.push(self.in_i * k);
        w.out_v.push(self.out_v * k);
        w.out_i.push(self.out_i * k);
        *self = Cell::default();
    }
}

#[derive(Default)]
struct Energy {
    input: f64,
    output: f64,
    dissipated: Option<f64>,
}

fn load_state_is_finite(s: &LoadState) -> bool {
    match s {
        LoadState::Resistive => true,
        LoadState::Rl { i } => i.is_finite(),
        LoadState::Motor(m) => m.is_finite(),
    }
}

/// Sinusoidal steady state of the unloaded LC at the supply frequency.
fn filter_initial(d: &FilterDesign, v_pk: f64, theta: f64, omega: f64) -> FilterState {
    let h = 1.0 / (1.0 - omega * omega * d.l_f * d.c_f);
    let v_c = three_phase_at(v_pk * h, theta);
    // i = C·dv/dt
    let i_l = three_phase_at(omega * d.c_f * v_pk * h, theta + 0.5 * std::f64::consts::PI);
    FilterState { i_l, v_c }
}

fn controller(s: &Scenario, target: &ModulationTarget) -> Option<CrossCoupledController> {
    if s.control.mode != ControlMode::Fuzzy {
        return None;
    }
    let v_ref = target.q * target.v_im;
    let limit = max_ratio(s.modulation.method) * target.v_im;
    let mut c = CrossCoupledController::for_reference(v_ref, s.control.filter_tau_s, limit);
    for ch in [&mut c.d, &mut c.q] {
        if let Some(g) = s.control.gain_e {
            ch.gain_e = g;
        }
        if let Some(g) = s.control.gain_ce {
            ch.gain_ce = g;
        }
        if let Some(g) = s.control.gain_u {
            ch.gain_u = g;
        }
    }
    Some(c)
}

/// Fixed-period, segment-exact simulation of one scenario.
pub fn run(s: &Scenario, opts: RunOptions) -> Result<SimResult, SimError> {
    s.validate()?;
    let allow_over = opts.allow_overmodulation || s.sim.allow_overmodulation;
    let method = s.modulation.method;
    let load = s.load.model()?;
    let mut load_state = match (&load, &s.load) {
        (LoadModel::Motor(p), LoadSpec::Motor { initial_speed, .. }) => {
            LoadState::Motor(MotorState::at_speed(p, *initial_speed))
        }
        _ => load.initial_state(),
    };
    let base = s.target();
    let v_src = base.v_im * s.source.amplitude_scale;
    let t_seq = base.t_seq;
    let n_periods = ((s.sim.duration_s / t_seq).round() as usize).max(1);
    let cells = s.sim.samples_per_period;
    let cell_dt = t_seq / cells as f64;
    let transient_periods =
        ((s.sim.transient_fraction * n_periods as f64).ceil() as usize).min(n_periods.saturating_sub(1));

    let design = s.filter_design()?;
    let damping = s.filter.damping_ohm;
    let mut filt = design.map(|d| filter_initial(&d, v_src, base.phi_i, base.omega_i));

    let ctl = controller(s, &base);
    let reference_dq = Dq0::new(0.0, base.q * base.v_im, 0.0);
    let mut ctl_state = CrossCoupledState::default();
    let (mut q_eff, mut phi_eff) = (base.q, base.phi_o);

    let mut w = Waveforms {
        dt: cell_dt,
        in_v: Vec::with_capacity(n_periods * cells),
        in_i: Vec::with_capacity(n_periods * cells),
        out_v: Vec::with_capacity(n_periods * cells),
        out_i: Vec::with_capacity(n_periods * cells),
    };
    let mut cell = Cell::default();
    let mut energy = Energy::default();
    let mut stored_start = None;
    let mut prev_state: Option<SwitchState> = None;
    let (mut comm_sum, mut comm_max, mut comm_n) = (0usize, 0usize, 0usize);
    let mut overmodulated = 0usize;
    let mut prev_avg: Option<ThreePhase> = None;
    let eps = 1e-12 * t_seq;

    for p in 0..n_periods {
        let t0 = p as f64 * t_seq;
        let t_mid = t0 + 0.5 * t_seq;
        let analyzing = p >= transient_periods;
        if analyzing && stored_start.is_none() {
            stored_start = Some(load.stored_energy(&load_state));
            energy.dissipated = load.stored_energy(&load_state).map(|_| 0.0);
        }

        if let (Some(c), Some(v_avg)) = (&ctl, prev_avg) {
            let wt = base.omega_o * (t_mid - t_seq) + base.phi_o;
            let (out, next) = c.control_period(reference_dq, v_avg, wt, t_seq, &ctl_state);
            ctl_state = next;
            let (mag, lag) = out.amplitude_and_lag();
            q_eff = mag / base.v_im;
            phi_eff = base.phi_o - lag;
        }
        let target = ModulationTarget {
            q: q_eff,
            phi_o: phi_eff,
            ..base
        };
        let mut duty =
            duty_unchecked(method, &target, t_mid).map_err(|source| SimError::Modulation { period: p, source })?;
        if let Err(violation) = validate_duty(&duty) {
            if !allow_over {
                return Err(SimError::DutyViolation {
                    period: p,
                    time: t_mid,
                    violation,
                });
            }
            duty = duty.clipped();
            if analyzing {
                overmodulated += 1;
            }
        }
        let timeline = sequence_with(&duty, s.modulation.sequencing).expect("validated duty sequences");

        if analyzing {
            let mut c = timeline.internal_commutations();
            if let (Some(prev), Some(first)) = (prev_state, timeline.first_state()) {
                c += prev.commutations_to(&first);
            }
            comm_sum += c;
            comm_max = comm_max.max(c);
            comm_n += 1;
        }
        prev_state = timeline.last_state();

        let mut pos = 0.0;
        let mut c_idx = 0usize;
        let mut period_v = ThreePhase::ZERO;
        for seg in &timeline.segments {
            let mut rem = seg.duration;
            while rem > 0.0 {
                let boundary = (c_idx + 1) as f64 * cell_dt;
                let piece = if c_idx + 1 < cells {
                    rem.min(boundary - pos)
                } else {
                    rem
                };
                if piece > 0.0 {
                    let t_abs = t0 + pos + 0.5 * piece;
                    let theta_i = base.omega_i * t_abs + base.phi_i;
                    let v_in = match &filt {
                        Some(f) => f.v_c,
                        None => three_phase_at(v_src, theta_i),
                    };
                    let v_out = apply_state(&seg.state, v_in);
                    let v_ph = v_out.without_common_mode();
                    let li = load.interval(&load_state, v_out, piece);
                    let i_conv = input_current(&seg.state, li.i_mean);
                    let (i_src, p_in) = match (&mut filt, &design) {
                        (Some(f), Some(d)) => {
                            let v_s = three_phase_at(v_src, theta_i);
                            let i0 = f.i_l + (v_s - f.v_c) * damping.map_or(0.0, |r| 1.0 / r);
                            let (_, i1, next) = step_input_filter(d, damping, v_s, i_conv, f, piece);
                            let i_src = (i0 + i1) * 0.5;
                            *f = next;
                            (i_src, v_s.dot(&i_src))
                        }
                        _ => (i_conv, v_in.dot(&i_conv)),
                    };
                    cell.add(piece, v_in, i_src, v_ph, li.i_mean);
                    period_v = period_v + v_ph * piece;
                    if analyzing {
                        energy.input += p_in * piece;
                        energy.output += v_ph.dot(&li.i_mean) * piece;
                        if let (Some(acc), Some(d)) = (energy.dissipated.as_mut(), li.dissipated) {
                            *acc += d;
                        }
                    }
                    load_state = li.state;
                    pos += piece;
                    rem -= piece;
                }
                if c_idx + 1 < cells && pos >= boundary - eps {
                    cell.flush(&mut w);
                    c_idx += 1;
                }
            }
        }
        while c_idx < cells {
            cell.flush(&mut w);
            c_idx += 1;
        }
        prev_avg = Some(period_v * (1.0 / t_seq));
        if !load_state_is_finite(&load_state) {
            return Err(SimError::NonFinite { time: t0 + t_seq });
        }
    }

    let load_stored_delta = match (stored_start.flatten(), load.stored_energy(&load_state)) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let final_speed = match (&load, &load_state) {
        (LoadModel::Motor(p), LoadState::Motor(m)) => Some(m.mech_speed(p)),
        _ => None,
    };
    let start = transient_periods * cells;
    let analysis = Analysis::new(s, &base, &w, start);
    let mut notes = analysis.notes.clone();
    if overmodulated > 0 {
        notes.push(format!("{overmodulated} switching periods clipped (overmodulation)"));
    }
    let window_s = (w.len() - start) as f64 * cell_dt;

    // Relative balances; runs that move no energy at all balance trivially.
    let negligible = 1e-9 * base.v_im * base.v_im * window_s;
    let rel = |num: f64, den: f64| if den.abs() > negligible { num / den.abs() } else { 0.0 };
    let converter_balance_rel = rel(energy.input - energy.output, energy.input);
    let load_balance_rel = match (energy.dissipated, load_stored_delta) {
        (Some(d), Some(st)) => Some(rel(energy.output - d - st, energy.output)),
        _ => None,
    };

    let summary = Summary {
        method: method.name().to_string(),
        load: s.load.kind().to_string(),
        q_target: base.q,
        f_i_hz: s.source.frequency_hz,
        f_o_hz: s.output.frequency_hz,
        f_sw_hz: s.modulation.switching_hz,
        v_im: base.v_im,
        duration_s: n_periods as f64 * t_seq,
        analysis_start_s: start as f64 * cell_dt,
        sample_dt_s: cell_dt,
        thd_in: analysis.thd_in,
        thd_out: analysis.thd_out,
        pq_in: analysis.pq_in,
        pq_out: analysis.pq_out,
        transfer_ratio_measured: analysis.transfer_ratio,
        dominant_out_hz: analysis.dominant,
        spectral_bin_hz: analysis.bin_hz,
        commutations_per_period: if comm_n > 0 {
            comm_sum as f64 / comm_n as f64
        } else {
            0.0
        },
        max_commutations_per_period: comm_max,
        overmodulated_periods: overmodulated,
        energy: EnergyAccount {
            input_j: energy.input,
            output_j: energy.output,
            load_dissipated_j: energy.dissipated,
            load_stored_delta_j: load_stored_delta,
            converter_balance_rel,
            load_balance_rel,
        },
        p_in_mean_w: energy.input / window_s,
        p_out_mean_w: energy.output / window_s,
        final_speed_rad_s: final_speed,
        controlled: ctl.is_some(),
        notes,
    };
    Ok(SimResult {
        summary,
        waveforms: w,
        omega_o: base.omega_o,
        phi_o: base.phi_o,
    })
}

struct Analysis {
    thd_in: ThdPair,
    thd_out: ThdPair,
    pq_in: PQSetting,
    pq_out: PQSetting,
    transfer_ratio: f64,
    dominant: Option<f64>,
    bin_hz: f64,
    notes: Vec<String>,
}

impl Analysis {
    fn new(s: &Scenario, base: &ModulationTarget, w: &Waveforms, start: usize) -> Self {
        let n = w.len() - start;
        let grid = TimeGrid::new(w.dt, n.max(1)).expect("recording grid");
        let [in_v, ..] = phases(&w.in_v[start..]);
        let [in_i, ..] = phases(&w.in_i[start..]);
        let [out_v, ..] = phases(&w.out_v[start..]);
        let [out_i, ..] = phases(&w.out_i[start..]);
        let n_max = s.sim.thd_harmonics;
        let mut notes = Vec::new();
        let mut measure = |label: &str, series: &[f64], f: f64| -> (Option<f64>, Option<f64>) {
            let h = spectrum(series, f, &grid, n_max).and_then(|sp| thd(&sp));
            let wb = thd_wideband(series, f, &grid);
            if let Err(e) = &h {
                notes.push(format!("{label}: {}", describe(e)));
            }
            (h.ok(), wb.ok())
        };
        let transfer_ratio = spectrum(&out_v, s.output.frequency_hz, &grid, 1)
            .map(|sp| sp.fundamental() / base.v_im)
            .unwrap_or(0.0);
        // Below this the output is rounding noise: nothing is being converted.
        let idle = transfer_ratio < 1e-9;
        let (in_vh, in_vw) = measure("input voltage", &in_v, s.source.frequency_hz);
        let ((in_ih, in_iw), (out_vh, out_vw), (out_ih, out_iw)) = if idle {
            ((None, None), (None, None), (None, None))
        } else {
            (
                measure("input current", &in_i, s.source.frequency_hz),
                measure("output voltage", &out_v, s.output.frequency_hz),
                measure("output current", &out_i, s.output.frequency_hz),
            )
        };
        if idle {
            for label in ["input current", "output voltage", "output current"] {
                notes.push(format!("{label}: no fundamental"));
            }
        }
        // Whole output periods, so the fundamental falls on a bin.
        let per = 1.0 / (s.output.frequency_hz * w.dt);
        let whole = ((((n as f64) / per).floor() * per).round() as usize).clamp(4.min(n), n);
        let dom_grid = TimeGrid::new(w.dt, whole.max(1)).expect("recording grid");
        let (dominant, bin_hz) = match dominant_frequency(&out_i[..whole], &dom_grid) {
            Ok((f, b)) if !idle => (Some(f), b),
            Ok((_, b)) => (None, b),
            Err(_) => (None, 1.0 / dom_grid.duration()),
        };
        let times: Vec<f64> = (0..n).map(|k| (start + k) as f64 * w.dt + 0.5 * w.dt).collect();
        let wt_in: Vec<f64> = times.iter().map(|t| base.omega_i * t + base.phi_i).collect();
        let wt_out: Vec<f64> = times.iter().map(|t| base.omega_o * t + base.phi_o).collect();
        let pq_in = pq(&w.in_v[start..], &w.in_i[start..], &wt_in, &grid).unwrap_or_default();
        let pq_out = pq(&w.out_v[start..], &w.out_i[start..], &wt_out, &grid).unwrap_or_default();
        Analysis {
            thd_in: ThdPair {
                voltage: in_vh,
                current: in_ih,
                voltage_wideband: in_vw,
                current_wideband: in_iw,
            },
            thd_out: ThdPair {
                voltage: out_vh,
                current: out_ih,
                voltage_wideband: out_vw,
                current_wideband: out_iw,
            },
            pq_in,
            pq_out,
            transfer_ratio,
            dominant,
            bin_hz,
            notes,
        }
    }
}

fn describe(e: &WaveformError) -> String {
    match e {
        WaveformError::NoFundamental => "no fundamental".to_string(),
        other => other.to_string(),
    }
}
