//! Simulation and stability certificates for nonlinear time-delay systems
//! under hybrid event-triggered/impulsive control.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificates;
pub mod commands;
pub mod config;
pub mod controller;
pub mod error;
pub mod history;
pub mod model;
pub mod output;
pub mod solver;
pub mod trigger;

pub use controller::{
    held_input, run_simulation, ControllerMode, EventKind, EventLog, EventRecord, SimResult,
    Termination,
};
pub use error::{Error, Result};
pub use history::{HistoryBuffer, Interpolation, Side};
pub use model::{InitialHistory, SystemModel};
pub use solver::{apply_impulse, integrate_segment, rk4_step, SolverConfig};
pub use trigger::{locate_crossing, trigger_margin, ComparisonFn, TriggerRule};
pub use config::{parse_config, RunConfig};
