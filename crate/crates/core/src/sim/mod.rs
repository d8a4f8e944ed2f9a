//! Scenario configuration, the switching-period simulation loop and its
//! outputs.

mod engine;
mod report;
mod result;
mod scenario;

pub use engine::{run, RunOptions, SimError};
pub use report::{report, ReportRow, ReportTable};
pub use result::{EnergyAccount, SimResult, Summary, ThdPair, Waveforms};
pub use scenario::{
    ConfigError, ControlMode, ControlSpec, FilterSpec, LoadSpec, ModulationSpec, OutputSpec, Scenario, SimSpec,
    SourceSpec, MAX_SAMPLES_PER_PERIOD,
};
