//! Mirror-ascent primal updates, projected-gradient dual updates, and the
//! shared advantage/entropy helpers.

use crate::model::{Policy, QFn};
use crate::solvers::SolverError;

/// Multiplicative-weights policy update `pi'(a|s) ~ pi(a|s) exp(eta1 Q(s,a))`.
///
/// Exponentials are computed with a per-row max subtraction so large
/// Lagrangian values cannot overflow.
pub fn mirror_ascent_step(pi: &Policy, q_l: &QFn, eta1: f64) -> Result<Policy, SolverError> {
    if eta1 < 0.0 {
        return Err(SolverError::NegativeStepSize(eta1));
    }
    let n = pi.n_states;
    let na = pi.n_actions;
    let mut probs = vec![0.0; n * na];
    for s in 0..n {
        let q_row = q_l.row(s);
        let pi_row = pi.row(s);
        let shift = q_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for a in 0..na {
            let w = pi_row[a] * (eta1 * (q_row[a] - shift)).exp();
            probs[s * na + a] = w;
            sum += w;
        }
        let sum = sum.max(1e-12);
        for a in 0..na {
            probs[s * na + a] /= sum;
        }
    }
    Policy::from_rows(n, na, probs).map_err(SolverError::from)
}

/// Fixed-horizon theoretical step sizes
/// `eta1 = sqrt(2 log|A| / T) (1 - gamma) / (1 + U)` and
/// `eta2 = U (1 - gamma) / sqrt(T)`.
pub fn gda_theory_stepsizes(horizon: usize, n_actions: usize, gamma: f64, u: f64) -> (f64, f64) {
    let t = horizon.max(1) as f64;
    let eta1 = (2.0 * (n_actions as f64).ln() / t).sqrt() * (1.0 - gamma) / (1.0 + u);
    let eta2 = u * (1.0 - gamma) / t.sqrt();
    (eta1, eta2)
}

/// Anytime form of the theoretical step sizes, using the 1-indexed iteration
/// count in place of the horizon.
pub fn gda_anytime_stepsizes(t: usize, n_actions: usize, gamma: f64, u: f64) -> (f64, f64) {
    gda_theory_stepsizes(t.max(1), n_actions, gamma, u)
}

/// Projected dual descent `lambda' = clip(lambda - eta2 (est_jc - b), 0, U)`.
pub fn projected_gd_dual_step(lambda: f64, est_jc: f64, b: f64, eta2: f64, u: f64) -> f64 {
    (lambda - eta2 * (est_jc - b)).clamp(0.0, u)
}

/// Normalized advantage row
/// `(1 - gamma) / (1 + U) * (q(s,a) - <q(s,.), pi(.|s)>)`; zero mean under
/// the current policy, and within `[-1, 1]` for exact Lagrangian tables.
pub fn normalized_advantage(q_row: &[f64], pi_row: &[f64], u: f64, gamma: f64) -> Vec<f64> {
    let mean: f64 = q_row.iter().zip(pi_row).map(|(&q, &p)| q * p).sum();
    let scale = (1.0 - gamma) / (1.0 + u);
    q_row.iter().map(|&q| scale * (q - mean)).collect()
}

/// Whole-table normalized advantage.
pub fn normalized_advantage_table(q_l: &QFn, pi: &Policy, u: f64, gamma: f64) -> QFn {
    let mut data = Vec::with_capacity(q_l.n_states * q_l.n_actions);
    for s in 0..q_l.n_states {
        data.extend(normalized_advantage(q_l.row(s), pi.row(s), u, gamma));
    }
    QFn::from_table(q_l.n_states, q_l.n_actions, data)
}

/// Effective Lagrangian table with entropy exploration:
/// `Q_hat_r + lambda Q_hat_c - nu_ent log pi`. Policy entries are floored at
/// `1e-12` before the logarithm.
pub fn entropy_regularized_q(q_r: &QFn, q_c: &QFn, lambda: f64, nu_ent: f64, pi: &Policy) -> QFn {
    QFn::from_fn(q_r.n_states, q_r.n_actions, |s, a| {
        q_r.get(s, a) + lambda * q_c.get(s, a) - nu_ent * pi.prob(s, a).max(1e-12).ln()
    })
}
