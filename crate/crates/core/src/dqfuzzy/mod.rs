//! Cross-coupled dq-axis fuzzy voltage controller: abc↔dq0 transforms, two
//! Mamdani fuzzy channels and the per-period correction of the modulation
//! reference.

mod controller;
mod fuzzy;
mod transform;

pub use controller::{
    fuzzy_step, Channel, ControlOutput, ControllerState, CrossCoupledController, CrossCoupledState, FuzzyController,
};
pub use fuzzy::{
    defuzzify, defuzzify_aggregate, fuzzify, infer, Aggregate, Degrees, FuzzyError, FuzzyPartition, Label, RuleBase,
    DEFUZZ_POINTS,
};
pub use transform::{abc_to_dq0, dq0_to_abc, Dq0};
