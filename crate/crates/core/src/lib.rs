//! Matrix-converter simulation core: waveform analytics, the 3×3 switch
//! matrix, five modulation strategies, a dq-axis fuzzy voltage controller,
//! load and input-filter models, and the scenario simulation engine.

#![allow(clippy::needless_range_loop)]

pub mod dqfuzzy;
pub mod filterdesign;
pub mod loads;
pub mod modulators;
pub mod sim;
pub mod switchcore;
pub mod waveforms;

pub use dqfuzzy::{abc_to_dq0, dq0_to_abc, Dq0};
pub use modulators::{max_ratio, MethodId, ModulationError, ModulationTarget};
pub use sim::{run, RunOptions, Scenario, SimError, SimResult};
pub use switchcore::{DutyMatrix, SwitchState, SwitchTimeline};
pub use waveforms::{PQSetting, Spectrum, ThreePhase, TimeGrid};

#[cfg(test)]
mod properties;
