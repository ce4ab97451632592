//! Config-driven experiment harness: JSON configs, single runs with CSV
//! emission, hyperparameter sweeps and their summaries.

mod config;
mod runner;
mod sweep;

pub use config::{
    AlgorithmConfig, CoresetConfig, DualCapConfig, EnvConfig, EstimatorConfig, ExperimentConfig,
    FeatureConfig, GridValue, RhoConfig,
};
pub use runner::{
    coreset_report, oracle_context, oracle_report, render_csv, run_cell, run_experiment,
    OracleContext, RunArtifacts,
};
pub use sweep::{report_dir, run_sweep, CellResult, CellStatus, SweepResult};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Solver(#[from] crate::solvers::SolverError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Design(#[from] crate::design::DesignError),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 infeasible, 4 numerical, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Solver(crate::solvers::SolverError::Infeasible { .. }) => 3,
            HarnessError::Oracle(crate::oracle::OracleError::Infeasible { .. }) => 3,
            HarnessError::Env(crate::envs::EnvError::UnattainableThreshold { .. }) => 3,
            HarnessError::Solver(crate::solvers::SolverError::InvalidHyperparameter(_)) => 2,
            HarnessError::Feature(_) => 2,
            HarnessError::Io { .. } => 1,
            _ => 4,
        }
    }
}
