//! Primal-dual solvers: update rules, feasibility estimation and the
//! iteration driver.

pub mod coin;
pub mod crpo;
mod driver;
pub mod mirror;

pub use driver::{
    estimate_feasibility_and_u, run_algorithm, AlgorithmSpec, CoresetSpec, DualCapSpec,
    EstimatorSpec, Feasibility, FeasibilityOutcome, SolveConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step size must be nonnegative, got {0}")]
    NegativeStepSize(f64),
    #[error("alpha_lambda must be positive, got {0}")]
    NonPositiveAlphaLambda(f64),
    #[error("coin-betting primal cannot advance past its horizon of {horizon}")]
    HorizonExhausted { horizon: usize },
    #[error("problem is infeasible: estimated slater margin {zeta_hat}")]
    Infeasible { zeta_hat: f64 },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Estimation(#[from] crate::estimation::EstimationError),
    #[error(transparent)]
    Design(#[from] crate::design::DesignError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}
