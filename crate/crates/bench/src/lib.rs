//! Experiment runner for `imanpl`: grid sweeps over the regularization weight
//! and seeds, clustering scores, result CSVs and summary tables.

pub mod config;
pub mod error;
pub mod results;
pub mod run;
pub mod select;
pub mod tables;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use results::ResultRow;
pub use run::{run_experiment, run_experiment_traced, RunOutcome};
pub use select::{summarize, sweep_and_select, CellSummary};
pub use tables::{emit_tables, render_table};
