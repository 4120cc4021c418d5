//! Configuration-driven experiment runner behind the `bifbm` CLI: wires
//! sampler, estimators and local time together, aggregates Monte Carlo
//! statistics, and emits deterministic CSV/JSON reports.

mod config;
mod report;
mod run;

pub use config::{
    emit_config, parse_config, parse_config_with_experiment, Experiment, ExperimentConfig,
    FunctionSpec, OutputFormat,
};
pub use report::emit_report;
pub use run::{run_experiment, RunReport, RunRow};
