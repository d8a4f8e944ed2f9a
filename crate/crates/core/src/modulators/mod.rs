//! Duty-matrix generation for the five modulation strategies and their
//! theoretical voltage-transfer limits.

mod indirect;
mod space_vector;
mod venturini;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::switchcore::DutyMatrix;
use crate::waveforms::ThreePhase;

pub use indirect::{indirect_mod, indirect_mod_unchecked, overmodulation_gain};
pub use space_vector::{svm_mod, svm_mod_unchecked, svm_vector_times, SvmTimes};
pub use venturini::{scalar_mod, venturini_basic, venturini_optimum};

/// √3/2: limit of the common-mode-injected direct methods and of SVM.
pub const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// 6√3/π²: fictitious-DC-link limit with six-pulse rectifier and six-step inverter.
pub fn indirect_limit() -> f64 {
    6.0 * 3f64.sqrt() / (PI * PI)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error("invalid modulation target: {0}")]
    InvalidTarget(String),
    #[error("{method}: transfer ratio q={q:.4} exceeds the limit {limit:.4}")]
    AboveLimit { method: MethodId, q: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    VenturiniBasic,
    VenturiniOptimum,
    Scalar,
    Svm,
    Indirect,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::VenturiniBasic,
        MethodId::VenturiniOptimum,
        MethodId::Scalar,
        MethodId::Svm,
        MethodId::Indirect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::VenturiniBasic => "venturini_basic",
            MethodId::VenturiniOptimum => "venturini_optimum",
            MethodId::Scalar => "scalar",
            MethodId::Svm => "svm",
            MethodId::Indirect => "indirect",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown modulation method `{s}`"))
    }
}

pub fn max_ratio(method: MethodId) -> f64 {
    match method {
        MethodId::VenturiniBasic => 0.5,
        MethodId::VenturiniOptimum | MethodId::Scalar | MethodId::Svm => SQRT3_2,
        MethodId::Indirect => indirect_limit(),
    }
}

/// Desired output (amplitude `q·v_im`, angle `ω_o t + φ_o`) against the
/// input supply (peak `v_im`, angle `ω_i t + φ_i`), for switching period `t_seq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationTarget {
    pub q: f64,
    pub omega_o: f64,
    pub phi_o: f64,
    pub v_im: f64,
    pub omega_i: f64,
    pub phi_i: f64,
    pub t_seq: f64,
}

impl ModulationTarget {
    pub fn new(
        q: f64,
        omega_o: f64,
        phi_o: f64,
        v_im: f64,
        omega_i: f64,
        phi_i: f64,
        t_seq: f64,
    ) -> Result<Self, ModulationError> {
        let t = Self {
            q,
            omega_o,
            phi_o,
            v_im,
            omega_i,
            phi_i,
            t_seq,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModulationError> {
        let all = [
            self.q,
            self.omega_o,
            self.phi_o,
            self.v_im,
            self.omega_i,
            self.phi_i,
            self.t_seq,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModulationError::InvalidTarget("non-finite field".into()));
        }
        if self.v_im <= 0.0 {
            return Err(ModulationError::InvalidTarget("v_im must be positive".into()));
        }
        if self.q < 0.0 {
            return Err(ModulationError::InvalidTarget("q must be non-negative".into()));
        }
        if self.omega_i <= 0.0 {
            return Err(ModulationError::InvalidTarget("omega_i must be positive".into()));
        }
        if self.t_seq <= 0.0 {
            return Err(ModulationError::InvalidTarget("t_seq must be positive".into()));
        }
        Ok(())
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn input_angle(&self, t: f64) -> f64 {
        self.omega_i * t + self.phi_i
    }

    pub fn output_angle(&self, t: f64) -> f64 {
        self.omega_o * t + self.phi_o
    }

    /// Analytic input phase voltages at `t`.
    pub fn input_voltages(&self, t: f64) -> ThreePhase {
        crate::waveforms::three_phase_at(self.v_im, self.input_angle(t))
    }

    /// Sinusoidal output reference (no common-mode terms) at `t`.
    pub fn output_reference(&self, t: f64) -> ThreePhase {
        crate::waveforms::three_phase_at(self.q * self.v_im, self.output_angle(t))
    }
}

/// Phase angle of input `k` relative to input A (0, −2π/3, −4π/3).
pub(crate) fn phase_offset(k: usize) -> f64 {
    -(k as f64) * TAU / 3.0
}

/// Duty matrix for `method`, enforcing each method's transfer-ratio limit
/// where the construction itself depends on it (SVM and indirect).
pub fn duty(method: MethodId, target: &ModulationTarget, t: f64) -> Result<DutyMatrix, ModulationError> {
    match method {
        MethodId::VenturiniBasic => Ok(venturini_basic(target, t)),
        MethodId::VenturiniOptimum => Ok(venturini_optimum(target, t)),
        MethodId::Scalar => Ok(scalar_mod(target, t)),
        MethodId::Svm => svm_mod(target, t),
        MethodId::Indirect => indirect_mod(target, t),
    }
}

/// As [`duty`] but without the up-front ratio checks, so the validity
/// boundary can be located empirically from the duty cells. Fails only when
/// no duty matrix exists for the requested ratio.
pub fn duty_unchecked(method: MethodId, target: &ModulationTarget, t: f64) -> Result<DutyMatrix, ModulationError> {
    match method {
        MethodId::Svm => Ok(svm_mod_unchecked(target, t)),
        MethodId::Indirect => indirect_mod_unchecked(target, t),
        _ => duty(method, target, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        assert_eq!(max_ratio(MethodId::VenturiniBasic), 0.5);
        assert!((max_ratio(MethodId::Scalar) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((max_ratio(MethodId::Indirect) - 1.05296).abs() < 1e-5);
    }

    #[test]
    fn names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
        }
        assert!("venturini".parse::<MethodId>().is_err());
    }

    #[test]
    fn target_validation() {
        assert!(ModulationTarget::new(0.5, 1.0, 0.0, 0.0, 377.0, 0.0, 1e-4).is_err());
        assert!(ModulationTarget::new(-0.1, 1.0, 0.0, 1.0, 377.0, 0.0, 1e-4).is_err());
        assert!(ModulationTarget::new(0.1, 1.0, 0.0, 1.0, 0.0, 0.0, 1e-4).is_err());
        assert!(ModulationTarget::new(0.1, 1.0, 0.0, 1.0, 377.0, f64::NAN, 1e-4).is_err());
        assert!(ModulationTarget::new(0.1, 1.0, 0.0, 1.0, 377.0, 0.0, 1e-4).is_ok());
    }
}
