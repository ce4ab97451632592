//! Optimality-gap / constraint-violation metrics, primal and dual regret,
//! and the per-iteration log every experiment produces.

use std::time::Duration;

use thiserror::Error;

use crate::model::{OccupancyMeasure, Policy, QFn};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics over an empty history are undefined")]
    EmptyHistory,
}

/// Everything recorded about one solver iteration: exact values for
/// reporting, the estimated quantities the updates actually consumed, and
/// the iterate itself.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub j_r: f64,
    pub j_c: f64,
    pub est_jc: f64,
    pub lambda: f64,
    pub q_hat_r: QFn,
    pub q_hat_c: QFn,
    pub policy: Policy,
}

/// Full run record; the unit all acceptance checks operate on.
#[derive(Debug, Clone)]
pub struct IterateLog {
    pub records: Vec<IterateRecord>,
    pub seed: u64,
    /// Dual projection cap `U`; absent for dual-free algorithms.
    pub dual_cap: Option<f64>,
    /// Estimated Slater margin from the feasibility pre-phase, when run.
    pub zeta_hat: Option<f64>,
    pub wall: Duration,
}

impl IterateLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn est_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.est_jc).collect()
    }

    /// `(J_r, J_c)` exact-value history.
    pub fn value_history(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.j_r, r.j_c)).collect()
    }

    /// Lagrangian table `Q_hat_r + lambda_t Q_hat_c` of iteration `t`.
    pub fn lagrangian_q(&self, t: usize) -> QFn {
        let rec = &self.records[t];
        rec.q_hat_r.combine(&rec.q_hat_c, rec.lambda)
    }
}

/// Average optimality gap and constraint violation of a value history.
///
/// `OG = (1/T) sum (J_r* - J_r(t))`; `CV = (1/T) [sum (b - J_c(t))]_+` with
/// the positive part applied to the summed violation, not per iterate.
pub fn compute_og_cv(
    history: &[(f64, f64)],
    j_r_star: f64,
    b: f64,
) -> Result<(f64, f64), MetricsError> {
    if history.is_empty() {
        return Err(MetricsError::EmptyHistory);
    }
    let t = history.len() as f64;
    let gap: f64 = history.iter().map(|(j_r, _)| j_r_star - j_r).sum();
    let violation: f64 = history.iter().map(|(_, j_c)| b - j_c).sum();
    Ok((gap / t, violation.max(0.0) / t))
}

/// One primal-regret term `E_{s ~ nu} <comparator(.|s) - pi(.|s), q_l(s, .)>`.
pub fn primal_regret_step(
    policy: &Policy,
    q_l: &QFn,
    comparator: &Policy,
    nu: &OccupancyMeasure,
) -> f64 {
    let mut total = 0.0;
    for s in 0..policy.n_states {
        let w = nu.state(s);
        if w == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for a in 0..policy.n_actions {
            inner += (comparator.prob(s, a) - policy.prob(s, a)) * q_l.get(s, a);
        }
        total += w * inner;
    }
    total
}

/// Primal regret of a logged run against `comparator`, with states weighted
/// by the comparator's normalized occupancy.
pub fn primal_regret(log: &IterateLog, comparator: &Policy, nu: &OccupancyMeasure) -> f64 {
    (0..log.len())
        .map(|t| primal_regret_step(&log.records[t].policy, &log.lagrangian_q(t), comparator, nu))
        .sum()
}

/// Dual regret `sum_t (lambda_t - lambda_ref)(est_jc(t) - b)`.
pub fn dual_regret(lambdas: &[f64], est_values: &[f64], lambda_ref: f64, b: f64) -> f64 {
    lambdas
        .iter()
        .zip(est_values)
        .map(|(&l, &jc)| (l - lambda_ref) * (jc - b))
        .sum()
}

/// Expected KL divergence `E_{s ~ nu} KL(p(.|s) || q(.|s))`; infinite when
/// `q` lacks support somewhere `p` has mass.
pub fn kl_under_occupancy(p: &Policy, q: &Policy, nu: &OccupancyMeasure) -> f64 {
    let mut total = 0.0;
    for s in 0..p.n_states {
        let w = nu.state(s);
        if w == 0.0 {
            continue;
        }
        for a in 0..p.n_actions {
            let pa = p.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let qa = q.prob(s, a);
            if qa == 0.0 {
                return f64::INFINITY;
            }
            total += w * pa * (pa / qa).ln();
        }
    }
    total
}
