//! Experiment harness behind the command-line tool.

pub mod check;
pub mod config;
pub mod output;
pub mod run;
pub mod sweep;

pub use check::{verify, VerifyReport};
pub use config::{ExperimentConfig, ScheduleSpec, StreamSpec};
pub use output::{resolve_out_dir, write_run_outputs, OUT_DIR_ENV};
pub use run::{prepare, run_experiment, run_seed, PrefixMetrics, SeedRun};
pub use sweep::{run_sweep, sweep_table, SweepCell};
