//! Experiment harness for the discrete bouncy particle sampler: JSON
//! configuration, seeded replicate pools, sweeps, convergence and MMPP
//! studies, and CSV/JSON/SVG outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod setup;
pub mod svg;

pub use commands::{
    cmd_converge, cmd_diag, cmd_mmpp, cmd_precondition, cmd_run, cmd_sweep, ConvergeReport,
    MmppReport, PreconditionReport, RunReport, SweepReport,
};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
