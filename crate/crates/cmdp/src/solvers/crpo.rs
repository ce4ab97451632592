//! CRPO baseline: a primal-only rule that ascends the reward while the
//! estimated constraint value clears `b + eta_tol` and otherwise ascends the
//! constraint reward.

use crate::model::{Policy, QFn};
use crate::solvers::mirror::mirror_ascent_step;
use crate::solvers::SolverError;

/// One CRPO update; the boundary `est_jc = b + eta_tol` takes the reward
/// branch.
#[allow(clippy::too_many_arguments)]
pub fn crpo_step(
    pi: &Policy,
    q_r: &QFn,
    q_c: &QFn,
    est_jc: f64,
    b: f64,
    eta_tol: f64,
    alpha_pi: f64,
) -> Result<Policy, SolverError> {
    if est_jc >= b + eta_tol {
        mirror_ascent_step(pi, q_r, alpha_pi)
    } else {
        mirror_ascent_step(pi, q_c, alpha_pi)
    }
}
