pub mod config;
pub mod runner;

pub use config::RunConfig;
pub use runner::{
    compare_runs, dump_diag_scatter, run_experiment, run_experiment_from_file, CliError,
    RunSummary,
};
