//! Star-connected R and RL loads with exact piecewise-constant updates, and
//! a stationary-frame flux-linkage induction-machine model.

use serde::{Deserialize, Serialize};

use crate::dqfuzzy::{abc_to_dq0, dq0_to_abc, Dq0};
use crate::waveforms::ThreePhase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RLParams {
    pub r: f64,
    pub l: f64,
}

impl RLParams {
    pub fn new(r: f64, l: f64) -> Result<Self, String> {
        if !(r.is_finite() && r > 0.0) {
            return Err(format!("load resistance must be positive, got {r}"));
        }
        if !(l.is_finite() && l >= 0.0) {
            return Err(format!("load inductance must be non-negative, got {l}"));
        }
        Ok(Self { r, l })
    }

    pub fn time_constant(&self) -> f64 {
        self.l / self.r
    }

    /// Energy held in the three inductors.
    pub fn stored_energy(&self, i: ThreePhase) -> f64 {
        0.5 * self.l * i.dot(&i)
    }
}

/// Current and its first two moments over one constant-voltage interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlInterval {
    pub i_end: ThreePhase,
    /// `∫ i dt / dt`
    pub i_mean: ThreePhase,
    /// `∫ r·Σi² dt`: resistive energy over the interval.
    pub dissipated: f64,
}

/// Exact response of each phase to the star-referred voltage held for `dt`.
pub fn rl_interval(p: &RLParams, i0: ThreePhase, v_applied: ThreePhase, dt: f64) -> RlInterval {
    let v_ph = v_applied.without_common_mode();
    let i_ss = v_ph.map(|v| v / p.r);
    if p.l == 0.0 {
        return RlInterval {
            i_end: i_ss,
            i_mean: i_ss,
            dissipated: p.r * i_ss.dot(&i_ss) * dt,
        };
    }
    let tau = p.l / p.r;
    let x = dt / tau;
    let e = (-x).exp();
    // (1 − e^{−x}) and (1 − e^{−2x}) without cancellation for tiny x
    let one_m_e = -(-x).exp_m1();
    let one_m_e2 = -(-2.0 * x).exp_m1();
    let mut end = [0.0; 3];
    let mut mean = [0.0; 3];
    let mut sq = 0.0;
    let (a0, ss) = (i0.to_array(), i_ss.to_array());
    for j in 0..3 {
        let d = a0[j] - ss[j];
        end[j] = ss[j] + d * e;
        let int_i = ss[j] * dt + d * tau * one_m_e;
        mean[j] = int_i / dt;
        sq += ss[j] * ss[j] * dt + 2.0 * ss[j] * d * tau * one_m_e + d * d * 0.5 * tau * one_m_e2;
    }
    RlInterval {
        i_end: ThreePhase::from_array(end),
        i_mean: ThreePhase::from_array(mean),
        dissipated: p.r * sq,
    }
}

pub fn step_rl(p: &RLParams, i: ThreePhase, v_applied: ThreePhase, dt: f64) -> ThreePhase {
    rl_interval(p, i, v_applied, dt).i_end
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    pub v_ll: f64,
    pub f: f64,
    pub r_s: f64,
    pub l_ls: f64,
    pub r_r: f64,
    pub l_lr: f64,
    pub l_m: f64,
    pub pole_pairs: u32,
    pub inertia: f64,
    pub load_torque: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            v_ll: 220.0,
            f: 60.0,
            r_s: 0.435,
            l_ls: 2e-3,
            r_r: 0.816,
            l_lr: 2e-3,
            l_m: 69.31e-3,
            pole_pairs: 2,
            inertia: 0.089,
            load_torque: 0.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("r_s", self.r_s),
            ("l_ls", self.l_ls),
            ("r_r", self.r_r),
            ("l_lr", self.l_lr),
            ("l_m", self.l_m),
            ("inertia", self.inertia),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("motor {name} must be positive, got {v}"));
            }
        }
        if self.pole_pairs == 0 {
            return Err("motor pole_pairs must be at least 1".into());
        }
        if !self.load_torque.is_finite() {
            return Err("motor load_torque must be finite".into());
        }
        Ok(())
    }

    /// Synchronous mechanical speed at the rated frequency.
    pub fn synchronous_speed(&self) -> f64 {
        std::f64::consts::TAU * self.f / self.pole_pairs as f64
    }

    fn l_s(&self) -> f64 {
        self.l_ls + self.l_m
    }

    fn l_r(&self) -> f64 {
        self.l_lr + self.l_m
    }
}

/// Stator and rotor flux linkages in the stationary qd frame, plus rotor
/// electrical speed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    pub psi_qs: f64,
    pub psi_ds: f64,
    pub psi_qr: f64,
    pub psi_dr: f64,
    pub omega_r: f64,
}

impl MotorState {
    pub fn at_speed(p: &MotorParams, mech_speed: f64) -> Self {
        Self {
            omega_r: mech_speed * p.pole_pairs as f64,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.psi_qs, self.psi_ds, self.psi_qr, self.psi_dr, self.omega_r]
            .iter()
            .all(|x| x.is_finite())
    }

    pub fn mech_speed(&self, p: &MotorParams) -> f64 {
        self.omega_r / p.pole_pairs as f64
    }

    /// `(i_qs, i_ds, i_qr, i_dr)`.
    pub fn currents(&self, p: &MotorParams) -> (f64, f64, f64, f64) {
        let (ls, lr, lm) = (p.l_s(), p.l_r(), p.l_m);
        let det = ls * lr - lm * lm;
        (
            (lr * self.psi_qs - lm * self.psi_qr) / det,
            (lr * self.psi_ds - lm * self.psi_dr) / det,
            (ls * self.psi_qr - lm * self.psi_qs) / det,
            (ls * self.psi_dr - lm * self.psi_ds) / det,
        )
    }

    pub fn stator_currents(&self, p: &MotorParams) -> ThreePhase {
        let (iq, id, _, _) = self.currents(p);
        dq0_to_abc(Dq0::new(id, iq, 0.0), 0.0)
    }

    pub fn torque(&self, p: &MotorParams) -> f64 {
        let (iq, id, _, _) = self.currents(p);
        1.5 * p.pole_pairs as f64 * (self.psi_ds * iq - self.psi_qs * id)
    }

    fn derivative(&self, p: &MotorParams, v_qs: f64, v_ds: f64) -> [f64; 5] {
        let (iqs, ids, iqr, idr) = self.currents(p);
        let te = 1.5 * p.pole_pairs as f64 * (self.psi_ds * iqs - self.psi_qs * ids);
        [
            v_qs - p.r_s * iqs,
            v_ds - p.r_s * ids,
            -p.r_r * iqr + self.omega_r * self.psi_dr,
            -p.r_r * idr - self.omega_r * self.psi_qr,
            p.pole_pairs as f64 / p.inertia * (te - p.load_torque),
        ]
    }

    fn offset(&self, k: &[f64; 5], h: f64) -> Self {
        Self {
            psi_qs: self.psi_qs + h * k[0],
            psi_ds: self.psi_ds + h * k[1],
            psi_qr: self.psi_qr + h * k[2],
            psi_dr: self.psi_dr + h * k[3],
            omega_r: self.omega_r + h * k[4],
        }
    }
}

/// Minimum RK4 sub-steps per constant-voltage interval.
pub const MOTOR_SUBSTEPS: usize = 4;
/// Longest RK4 sub-step.
const MOTOR_MAX_STEP: f64 = 20e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorInterval {
    pub state: MotorState,
    /// Trapezoidal mean of the stator currents over the interval.
    pub i_mean: ThreePhase,
}

/// Advances the machine across an interval of constant applied voltage.
pub fn motor_interval(p: &MotorParams, s: &MotorState, v_applied: ThreePhase, dt: f64) -> MotorInterval {
    let v = abc_to_dq0(v_applied, 0.0);
    let n = MOTOR_SUBSTEPS.max((dt / MOTOR_MAX_STEP).ceil() as usize);
    let h = dt / n as f64;
    let mut x = *s;
    let mut i_prev = x.stator_currents(p);
    let mut acc = ThreePhase::ZERO;
    for _ in 0..n {
        let k1 = x.derivative(p, v.v_q, v.v_d);
        let k2 = x.offset(&k1, 0.5 * h).derivative(p, v.v_q, v.v_d);
        let k3 = x.offset(&k2, 0.5 * h).derivative(p, v.v_q, v.v_d);
        let k4 = x.offset(&k3, h).derivative(p, v.v_q, v.v_d);
        let mut k = [0.0; 5];
        for i in 0..5 {
            k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        x = x.offset(&k, h);
        let i_next = x.stator_currents(p);
        acc = acc + (i_prev + i_next) * 0.5;
        i_prev = i_next;
    }
    MotorInterval {
        state: x,
        i_mean: acc * (1.0 / n as f64),
    }
}

pub fn step_motor(p: &MotorParams, s: &MotorState, v_applied: ThreePhase, dt: f64) -> MotorState {
    motor_interval(p, s, v_applied, dt).state
}

/// Load selection as configured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadModel {
    Resistive { r: f64 },
    Rl(RLParams),
    Motor(MotorParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadState {
    Resistive,
    Rl { i: ThreePhase },
    Motor(MotorState),
}

/// Result of driving a load with one constant voltage for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadInterval {
    pub state: LoadState,
    pub i_mean: ThreePhase,
    /// Resistive energy inside the load, where computed exactly.
    pub dissipated: Option<f64>,
}

impl LoadModel {
    pub fn initial_state(&self) -> LoadState {
        match self {
            LoadModel::Resistive { .. } => LoadState::Resistive,
            LoadModel::Rl(_) => LoadState::Rl { i: ThreePhase::ZERO },
            LoadModel::Motor(_) => LoadState::Motor(MotorState::default()),
        }
    }

    pub fn interval(&self, state: &LoadState, v_applied: ThreePhase, dt: f64) -> LoadInterval {
        match (self, state) {
            (LoadModel::Resistive { r }, _) => {
                let i = v_applied.without_common_mode().map(|v| v / r);
                LoadInterval {
                    state: LoadState::Resistive,
                    i_mean: i,
                    dissipated: Some(r * i.dot(&i) * dt),
                }
            }
            (LoadModel::Rl(p), LoadState::Rl { i }) => {
                let r = rl_interval(p, *i, v_applied, dt);
                LoadInterval {
                    state: LoadState::Rl { i: r.i_end },
                    i_mean: r.i_mean,
                    dissipated: Some(r.dissipated),
                }
            }
            (LoadModel::Motor(p), LoadState::Motor(s)) => {
                let r = motor_interval(p, s, v_applied, dt);
                LoadInterval {
                    state: LoadState::Motor(r.state),
                    i_mean: r.i_mean,
                    dissipated: None,
                }
            }
            _ => panic!("load state does not match load model"),
        }
    }

    /// Magnetic energy held by the load, where it is tracked.
    pub fn stored_energy(&self, state: &LoadState) -> Option<f64> {
        match (self, state) {
            (LoadModel::Resistive { .. }, _) => Some(0.0),
            (LoadModel::Rl(p), LoadState::Rl { i }) => Some(p.stored_energy(*i)),
            _ => None,
        }
    }
}
