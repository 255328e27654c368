//! Simulator of a grid-connected variable-speed wind energy conversion
//! system: fixed-pitch turbine, PMSG, diode bridge, boost converter, DC link
//! and a hysteresis current-controlled grid inverter, driven by a
//! step-and-search maximum power point tracker.

pub mod aero;
pub mod cli;
pub mod control;
pub mod error;
pub mod machine;
pub mod power;
pub mod scenario;
pub mod simcore;
pub mod steady;

pub use error::{Error, Result};
pub use scenario::Scenario;
pub use simcore::{run_scenario, RunOutput, TimeSeries};
