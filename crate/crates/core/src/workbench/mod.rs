//! Command-line workbench: configuration, initial data, snapshots and the
//! `run`, `check-f`, `normalize` and `selftest` commands.

pub mod commands;
pub mod config;
pub mod selftest;
pub mod snapshot;
pub mod specs;

pub use commands::{cmd_check_f, cmd_normalize, cmd_run, execute_run, EXIT_ERROR, EXIT_GAUGE_FAILURE, EXIT_OK};
pub use config::RunConfig;
pub use selftest::{cmd_selftest, run_selftest, SelftestOptions};
pub use snapshot::Snapshot;
pub use specs::{parse_f_field, parse_f_spec, parse_u0_spec, quadric_field, random_field};
