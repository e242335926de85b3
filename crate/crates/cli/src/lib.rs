//! Batch front-end for the `lwgcn` preprocessor and simulator.
//!
//! Every subcommand is a plain function here so it can be driven from tests;
//! `main.rs` only parses arguments and maps failures to exit codes.

pub mod commands;
pub mod config;
pub mod exit;
pub mod sweep;

pub use commands::{
    cmd_gen, cmd_preprocess, cmd_report, cmd_simulate, efficiency, load_schedules, Efficiency, ModelChoice,
    PreprocessSummary, SimulationRecord,
};
pub use config::{ArchOverrides, DatasetSource, FileConfig};
pub use exit::{exit_code, ExitCategory, VerificationFailed};
pub use sweep::{cmd_sweep, SweepRow, SweepSpec};
