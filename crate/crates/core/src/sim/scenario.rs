//! Scenario description, loaded from TOML. Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filterdesign::{design_input_filter, FilterDesign};
use crate::loads::{LoadModel, MotorParams, RLParams};
use crate::modulators::{MethodId, ModulationTarget};
use crate::switchcore::Sequencing;
use crate::waveforms::phase_peak_from_line_rms;

/// Recording cells per switching period are capped here to bound output size.
pub const MAX_SAMPLES_PER_PERIOD: usize = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario file {path}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_v_ll")]
    pub v_ll_rms: f64,
    #[serde(default = "default_f_i")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    /// Actual source amplitude relative to the nominal one the modulator
    /// assumes; values below 1 model a sagging supply.
    #[serde(default = "one")]
    pub amplitude_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub method: MethodId,
    #[serde(default = "default_f_sw")]
    pub switching_hz: f64,
    #[serde(default)]
    pub sequencing: Sequencing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_transient")]
    pub transient_fraction: f64,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default = "default_harmonics")]
    pub thd_harmonics: usize,
    #[serde(default)]
    pub allow_overmodulation: bool,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            duration_s: default_duration(),
            transient_fraction: default_transient(),
            samples_per_period: default_samples(),
            thd_harmonics: default_harmonics(),
            allow_overmodulation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LoadSpec {
    R {
        r_ohm: f64,
    },
    Rl {
        r_ohm: f64,
        l_h: f64,
    },
    Motor {
        #[serde(default = "motor_v_ll")]
        v_ll: f64,
        #[serde(default = "default_f_i")]
        f_hz: f64,
        #[serde(default = "motor_r_s")]
        r_s: f64,
        #[serde(default = "motor_l_leak")]
        l_ls: f64,
        #[serde(default = "motor_r_r")]
        r_r: f64,
        #[serde(default = "motor_l_leak")]
        l_lr: f64,
        #[serde(default = "motor_l_m")]
        l_m: f64,
        #[serde(default = "motor_pole_pairs")]
        pole_pairs: u32,
        #[serde(default = "motor_inertia")]
        inertia: f64,
        #[serde(default)]
        load_torque: f64,
        /// Initial mechanical speed, rad/s.
        #[serde(default)]
        initial_speed: f64,
    },
}

impl LoadSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadSpec::R { .. } => "r",
            LoadSpec::Rl { .. } => "rl",
            LoadSpec::Motor { .. } => "motor",
        }
    }

    pub fn model(&self) -> Result<LoadModel, ConfigError> {
        match *self {
            LoadSpec::R { r_ohm } => {
                if !(r_ohm.is_finite() && r_ohm > 0.0) {
                    return Err(invalid(format!("load.r_ohm must be positive, got {r_ohm}")));
                }
                Ok(LoadModel::Resistive { r: r_ohm })
            }
            LoadSpec::Rl { r_ohm, l_h } => RLParams::new(r_ohm, l_h).map(LoadModel::Rl).map_err(invalid),
            LoadSpec::Motor {
                v_ll,
                f_hz,
                r_s,
                l_ls,
                r_r,
                l_lr,
                l_m,
                pole_pairs,
                inertia,
                load_torque,
                ..
            } => {
                let p = MotorParams {
                    v_ll,
                    f: f_hz,
                    r_s,
                    l_ls,
                    r_r,
                    l_lr,
                    l_m,
                    pole_pairs,
                    inertia,
                    load_torque,
                };
                p.validate().map_err(invalid)?;
                Ok(LoadModel::Motor(p))
            }
        }
    }

    /// Motor load with every parameter at its default.
    pub fn default_motor() -> Self {
        LoadSpec::Motor {
            v_ll: motor_v_ll(),
            f_hz: default_f_i(),
            r_s: motor_r_s(),
            l_ls: motor_l_leak(),
            r_r: motor_r_r(),
            l_lr: motor_l_leak(),
            l_m: motor_l_m(),
            pole_pairs: motor_pole_pairs(),
            inertia: motor_inertia(),
            load_torque: 0.0,
            initial_speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_fc")]
    pub fc_hz: f64,
    #[serde(default = "default_p")]
    pub p_watts: f64,
    /// Resistor across each filter inductor; absent means undamped.
    #[serde(default)]
    pub damping_ohm: Option<f64>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            fc_hz: default_fc(),
            p_watts: default_p(),
            damping_ohm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    #[default]
    Off,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default)]
    pub mode: ControlMode,
    /// Error scale into the normalized universe, 1/V. Default `1/v_ref`.
    #[serde(default)]
    pub gain_e: Option<f64>,
    /// Error-change scale, 1/V. Default `10/v_ref`.
    #[serde(default)]
    pub gain_ce: Option<f64>,
    /// Output scale, V per control period. Default `0.05·v_ref`.
    #[serde(default)]
    pub gain_u: Option<f64>,
    #[serde(default = "default_tau")]
    pub filter_tau_s: f64,
}

impl Default for ControlSpec {
    fn default() -> Self {
        Self {
            mode: ControlMode::Off,
            gain_e: None,
            gain_ce: None,
            gain_u: None,
            filter_tau_s: default_tau(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub source: SourceSpec,
    pub output: OutputSpec,
    pub modulation: ModulationSpec,
    #[serde(default)]
    pub sim: SimSpec,
    pub load: LoadSpec,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub control: ControlSpec,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            v_ll_rms: default_v_ll(),
            frequency_hz: default_f_i(),
            phase_rad: 0.0,
            amplitude_scale: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_v_ll() -> f64 {
    440.0
}
fn default_f_i() -> f64 {
    60.0
}
fn default_f_sw() -> f64 {
    16_000.0
}
fn default_duration() -> f64 {
    0.5
}
fn default_transient() -> f64 {
    0.2
}
fn default_samples() -> usize {
    16
}
fn default_harmonics() -> usize {
    crate::waveforms::DEFAULT_HARMONICS
}
fn default_fc() -> f64 {
    2000.0
}
fn default_p() -> f64 {
    5000.0
}
fn default_tau() -> f64 {
    1e-3
}
fn motor_v_ll() -> f64 {
    220.0
}
fn motor_r_s() -> f64 {
    0.435
}
fn motor_r_r() -> f64 {
    0.816
}
fn motor_l_leak() -> f64 {
    2e-3
}
fn motor_l_m() -> f64 {
    69.31e-3
}
fn motor_pole_pairs() -> u32 {
    2
}
fn motor_inertia() -> f64 {
    0.089
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// 440 V / 60 Hz supply, 30 Hz output at q = 0.8, 16 kHz, optimum
    /// method, star-connected 10 Ω / 200 µH load.
    pub fn rl_reference() -> Self {
        Scenario {
            source: SourceSpec::default(),
            output: OutputSpec {
                frequency_hz: 30.0,
                phase_rad: 0.0,
                q: 0.8,
            },
            modulation: ModulationSpec {
                method: MethodId::VenturiniOptimum,
                switching_hz: default_f_sw(),
                sequencing: Sequencing::Single,
            },
            sim: SimSpec {
                duration_s: 0.4,
                ..SimSpec::default()
            },
            load: LoadSpec::Rl {
                r_ohm: 10.0,
                l_h: 200e-6,
            },
            filter: FilterSpec::default(),
            control: ControlSpec::default(),
        }
    }

    pub fn v_im(&self) -> f64 {
        phase_peak_from_line_rms(self.source.v_ll_rms)
    }

    pub fn t_seq(&self) -> f64 {
        1.0 / self.modulation.switching_hz
    }

    pub fn target(&self) -> ModulationTarget {
        ModulationTarget {
            q: self.output.q,
            omega_o: TAU * self.output.frequency_hz,
            phi_o: self.output.phase_rad,
            v_im: self.v_im(),
            omega_i: TAU * self.source.frequency_hz,
            phi_i: self.source.phase_rad,
            t_seq: self.t_seq(),
        }
    }

    pub fn filter_design(&self) -> Result<Option<FilterDesign>, ConfigError> {
        if !self.filter.enabled {
            return Ok(None);
        }
        let d = design_input_filter(
            self.filter.p_watts,
            self.v_im(),
            TAU * self.source.frequency_hz,
            self.filter.fc_hz,
        )
        .map_err(|e| invalid(e.to_string()))?;
        d.check_switching(self.modulation.switching_hz)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(Some(d))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [
            ("source.v_ll_rms", self.source.v_ll_rms),
            ("source.frequency_hz", self.source.frequency_hz),
            ("source.phase_rad", self.source.phase_rad),
            ("source.amplitude_scale", self.source.amplitude_scale),
            ("output.frequency_hz", self.output.frequency_hz),
            ("output.phase_rad", self.output.phase_rad),
            ("output.q", self.output.q),
            ("modulation.switching_hz", self.modulation.switching_hz),
            ("sim.duration_s", self.sim.duration_s),
            ("sim.transient_fraction", self.sim.transient_fraction),
            ("control.filter_tau_s", self.control.filter_tau_s),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        let positive = [
            ("source.v_ll_rms", self.source.v_ll_rms),
            ("source.frequency_hz", self.source.frequency_hz),
            ("output.frequency_hz", self.output.frequency_hz),
            ("modulation.switching_hz", self.modulation.switching_hz),
            ("sim.duration_s", self.sim.duration_s),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.source.amplitude_scale < 0.0 {
            return Err(invalid("source.amplitude_scale must be non-negative"));
        }
        if self.output.q < 0.0 {
            return Err(invalid(format!("output.q must be non-negative, got {}", self.output.q)));
        }
        let f_max = self.source.frequency_hz.max(self.output.frequency_hz);
        if self.modulation.switching_hz < 50.0 * f_max {
            return Err(invalid(format!(
                "modulation.switching_hz = {} must be at least 50× the highest fundamental ({f_max} Hz)",
                self.modulation.switching_hz
            )));
        }
        let periods = self.sim.duration_s * self.output.frequency_hz;
        if periods < 10.0 - 1e-9 {
            return Err(invalid(format!(
                "sim.duration_s covers {periods:.2} output periods; at least 10 are needed"
            )));
        }
        if !(0.0..1.0).contains(&self.sim.transient_fraction) {
            return Err(invalid("sim.transient_fraction must lie in [0, 1)"));
        }
        if self.sim.samples_per_period == 0 || self.sim.samples_per_period > MAX_SAMPLES_PER_PERIOD {
            return Err(invalid(format!(
                "sim.samples_per_period must be within 1..={MAX_SAMPLES_PER_PERIOD}"
            )));
        }
        if self.sim.thd_harmonics < 2 {
            return Err(invalid("sim.thd_harmonics must be at least 2"));
        }
        let nyquist = 0.5 * self.modulation.switching_hz * self.sim.samples_per_period as f64;
        let top = self.sim.thd_harmonics as f64 * f_max;
        if top >= nyquist {
            return Err(invalid(format!(
                "harmonic {} of {f_max} Hz ({top} Hz) is above the recording Nyquist rate {nyquist} Hz; \
                 raise sim.samples_per_period or lower sim.thd_harmonics",
                self.sim.thd_harmonics
            )));
        }
        if self.control.filter_tau_s < 0.0 {
            return Err(invalid("control.filter_tau_s must be non-negative"));
        }
        for (name, g) in [
            ("control.gain_e", self.control.gain_e),
            ("control.gain_ce", self.control.gain_ce),
            ("control.gain_u", self.control.gain_u),
        ] {
            if let Some(g) = g {
                if !(g.is_finite() && g > 0.0) {
                    return Err(invalid(format!("{name} must be positive")));
                }
            }
        }
        if let Some(r) = self.filter.damping_ohm {
            if !(r.is_finite() && r > 0.0) {
                return Err(invalid("filter.damping_ohm must be positive"));
            }
        }
        if let LoadSpec::Motor { initial_speed, .. } = self.load {
            if !initial_speed.is_finite() {
                return Err(invalid("load.initial_speed must be finite"));
            }
        }
        self.load.model()?;
        self.filter_design()?;
        Ok(())
    }

    /// Sets one numeric parameter by its dotted key.
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        match key {
            "q" | "output.q" => self.output.q = value,
            "f_o" | "output.frequency_hz" => self.output.frequency_hz = value,
            "output.phase_rad" => self.output.phase_rad = value,
            "f_i" | "source.frequency_hz" => self.source.frequency_hz = value,
            "source.v_ll_rms" => self.source.v_ll_rms = value,
            "source.amplitude_scale" => self.source.amplitude_scale = value,
            "f_sw" | "modulation.switching_hz" => self.modulation.switching_hz = value,
            "sim.duration_s" => self.sim.duration_s = value,
            "load.r_ohm" => match &mut self.load {
                LoadSpec::R { r_ohm } | LoadSpec::Rl { r_ohm, .. } => *r_ohm = value,
                LoadSpec::Motor { .. } => return Err(invalid("load.r_ohm does not apply to a motor load")),
            },
            "load.l_h" => match &mut self.load {
                LoadSpec::Rl { l_h, .. } => *l_h = value,
                _ => return Err(invalid("load.l_h applies only to an rl load")),
            },
            _ => return Err(invalid(format!("unknown sweep parameter `{key}`"))),
        }
        Ok(())
    }
}
