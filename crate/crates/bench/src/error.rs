use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("incomplete sweep for {dataset}/{algorithm}/{it_type}: no rows for u = {missing:?}")]
    IncompleteSweep {
        dataset: String,
        algorithm: String,
        it_type: String,
        missing: Vec<f64>,
    },
    #[error("nothing to tabulate")]
    Empty,
    #[error(transparent)]
    Core(#[from] imanpl::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
