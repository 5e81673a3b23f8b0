//! Closed-loop power control of a simulated 24 GHz mmWave transmit chain.
//!
//! The crate models the chain (attenuator, PA compression, RMS detector and
//! ADC), three controllers (PID, pure integral and fuzzy-integral), an EVM
//! analysis of the PA's power/linearity trade-off, and a fixed-step harness
//! that runs disturbance scenarios and scores the transient responses.

pub mod control;
pub mod error;
pub mod evm;
pub mod fuzzy;
pub mod io;
pub mod plant;
pub mod scenario;
pub mod sensing;
pub mod sim;

pub use control::{
    analytic_time_constant, quantize_command, ActuatorModel, Command, Controller, ControllerKind,
    ControllerSpec, PidGains,
};
pub use error::{CalibrationError, ConfigError, ControlError, EvmError, InferenceError, MetricsError};
pub use fuzzy::{FuzzyEngine, LinguisticTermSet, RuleTable, Term};
pub use plant::{Disturbance, DisturbanceSchedule, PaParams, Plant, PlantConfig};
pub use scenario::{ParseError, Scenario};
pub use sensing::{AdcModel, CalibrationResult, DetectorModel, Sensor};
pub use sim::{run_scenario, SimTrace, TransientMetrics};
