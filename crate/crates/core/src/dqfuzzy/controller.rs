use serde::{Deserialize, Serialize};

use super::fuzzy::{defuzzify_aggregate, fuzzify, infer, FuzzyPartition, RuleBase};
use super::transform::{abc_to_dq0, dq0_to_abc, Dq0};
use crate::waveforms::ThreePhase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    D,
    Q,
}

/// One fuzzy error channel: partitions, rule base and the scale factors
/// between physical units and the normalized universe [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyController {
    pub partition_e: FuzzyPartition,
    pub partition_ce: FuzzyPartition,
    pub partition_u: FuzzyPartition,
    pub rules: RuleBase,
    pub gain_e: f64,
    pub gain_ce: f64,
    pub gain_u: f64,
}

impl FuzzyController {
    pub fn new(rules: RuleBase, gain_e: f64, gain_ce: f64, gain_u: f64) -> Self {
        assert!(
            gain_e > 0.0 && gain_ce > 0.0 && gain_u > 0.0,
            "fuzzy controller gains must be positive"
        );
        Self {
            partition_e: FuzzyPartition::uniform(),
            partition_ce: FuzzyPartition::uniform(),
            partition_u: FuzzyPartition::uniform(),
            rules,
            gain_e,
            gain_ce,
            gain_u,
        }
    }

    /// Default scaling for a reference amplitude `v_ref`:
    /// `gain_e = 1/v_ref`, `gain_ce = 10/v_ref`, `gain_u = 0.05·v_ref` per step.
    pub fn for_reference(v_ref: f64) -> Self {
        let v_ref = v_ref.abs().max(f64::MIN_POSITIVE);
        Self::new(RuleBase::default(), 1.0 / v_ref, 10.0 / v_ref, 0.05 * v_ref)
    }

    /// Crisp incremental output for normalized-before-scaling inputs.
    pub fn output(&self, error: f64, delta_error: f64) -> f64 {
        let e = fuzzify(self.gain_e * error, &self.partition_e);
        let ce = fuzzify(self.gain_ce * delta_error, &self.partition_ce);
        let agg = infer(&e, &ce, &self.rules, &self.partition_u);
        // A total rule base over partitions of unity always fires.
        let u = defuzzify_aggregate(&agg).expect("total rule base always fires");
        self.gain_u * u
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub prev_error_d: f64,
    pub prev_error_q: f64,
    pub accumulated_d: f64,
    pub accumulated_q: f64,
}

/// Velocity-form step on one channel: returns the increment `u` and the
/// updated state (`accumulated += u`).
pub fn fuzzy_step(
    c: &FuzzyController,
    error: f64,
    state: &ControllerState,
    channel: Channel,
) -> (f64, ControllerState) {
    let mut next = *state;
    let (prev, acc) = match channel {
        Channel::D => (&mut next.prev_error_d, &mut next.accumulated_d),
        Channel::Q => (&mut next.prev_error_q, &mut next.accumulated_q),
    };
    let u = c.output(error, error - *prev);
    *prev = error;
    *acc += u;
    (u, next)
}

/// Two identical fuzzy channels sharing one rotation angle. The corrected d
/// and q references are recombined into a single abc reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCoupledController {
    pub d: FuzzyController,
    pub q: FuzzyController,
    /// Time constant of the first-order measurement filter (seconds).
    pub filter_tau: f64,
    /// Upper bound on the corrected reference magnitude.
    pub magnitude_limit: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossCoupledState {
    pub channels: ControllerState,
    pub filtered: Option<Dq0>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub corrected: Dq0,
    pub reference_abc: ThreePhase,
    pub measured: Dq0,
}

impl ControlOutput {
    /// Amplitude and phase lag `δ` such that the phase-a reference equals
    /// `amplitude·cos(wt − δ)`.
    pub fn amplitude_and_lag(&self) -> (f64, f64) {
        (self.corrected.magnitude(), self.corrected.v_d.atan2(self.corrected.v_q))
    }
}

impl CrossCoupledController {
    pub fn for_reference(v_ref: f64, filter_tau: f64, magnitude_limit: f64) -> Self {
        let ch = FuzzyController::for_reference(v_ref);
        Self {
            d: ch.clone(),
            q: ch,
            filter_tau,
            magnitude_limit,
        }
    }

    /// One control period of length `dt` at rotation angle `wt`.
    pub fn control_period(
        &self,
        v_ref_dq: Dq0,
        v_meas_abc: ThreePhase,
        wt: f64,
        dt: f64,
        state: &CrossCoupledState,
    ) -> (ControlOutput, CrossCoupledState) {
        let raw = abc_to_dq0(v_meas_abc, wt);
        let measured = match state.filtered {
            None => raw,
            Some(prev) if self.filter_tau > 0.0 => {
                let k = 1.0 - (-dt / self.filter_tau).exp();
                Dq0::new(
                    prev.v_d + k * (raw.v_d - prev.v_d),
                    prev.v_q + k * (raw.v_q - prev.v_q),
                    prev.v_0 + k * (raw.v_0 - prev.v_0),
                )
            }
            Some(_) => raw,
        };
        let (_, s) = fuzzy_step(&self.d, v_ref_dq.v_d - measured.v_d, &state.channels, Channel::D);
        let (_, mut s) = fuzzy_step(&self.q, v_ref_dq.v_q - measured.v_q, &s, Channel::Q);

        let mut corrected = Dq0::new(
            v_ref_dq.v_d + s.accumulated_d,
            v_ref_dq.v_q + s.accumulated_q,
            v_ref_dq.v_0,
        );
        let mag = corrected.magnitude();
        if mag > self.magnitude_limit && mag > 0.0 {
            let k = self.magnitude_limit / mag;
            corrected.v_d *= k;
            corrected.v_q *= k;
            s.accumulated_d = corrected.v_d - v_ref_dq.v_d;
            s.accumulated_q = corrected.v_q - v_ref_dq.v_q;
        }
        let out = ControlOutput {
            corrected,
            reference_abc: dq0_to_abc(corrected, wt),
            measured,
        };
        (
            out,
            CrossCoupledState {
                channels: s,
                filtered: Some(measured),
            },
        )
    }
}
