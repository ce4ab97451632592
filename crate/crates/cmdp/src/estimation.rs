//! Action-value estimation: Monte-Carlo rollouts on design points, weighted
//! least-squares fits through a feature map, and an exact model-based
//! estimator behind the same interface for zero-error runs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::design::Coreset;
use crate::envs::{sample_returns, Sampler};
use crate::eval::{exact_eval, EvalError};
use crate::features::FeatureMap;
use crate::model::{Policy, QFn, Signal, TabularCmdp};
use crate::seeding;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("rollouts need m >= 1 and horizon >= 1 (got m = {m}, horizon = {horizon})")]
    BadRolloutShape { m: usize, horizon: usize },
    #[error("{got} targets for a coreset of {expected} points")]
    TargetCount { got: usize, expected: usize },
    #[error("weighted least-squares solve failed")]
    SolveFailed,
}

/// Fitted weight vectors for both signals plus the map they extrapolate
/// through.
#[derive(Debug, Clone)]
pub struct QEstimate {
    pub theta_r: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub features: FeatureMap,
    pub meta: EstimateMeta,
}

/// Sampling provenance of an estimate.
#[derive(Debug, Clone, Copy)]
pub struct EstimateMeta {
    pub m: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Confidence parameter used in concentration checks.
    pub delta: f64,
}

/// Truncation horizon `ceil(log(eps_trunc (1 - gamma)) / log gamma)`, the
/// smallest `H` with `gamma^H / (1 - gamma) <= eps_trunc`.
pub fn truncation_horizon(gamma: f64, eps_trunc: f64) -> usize {
    let h = ((eps_trunc * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    (h.max(1.0)) as usize
}

/// Mean truncated discounted returns over `m` independent trajectories per
/// design point. Each `(point, trajectory)` pair draws its own generator
/// from `(master_seed, point index, trajectory index)`, so estimates do not
/// depend on evaluation order.
pub fn rollout_q_estimates(
    cmdp: &TabularCmdp,
    policy: &Policy,
    points: &[(usize, usize)],
    m: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), EstimationError> {
    if m == 0 || horizon == 0 {
        return Err(EstimationError::BadRolloutShape { m, horizon });
    }
    let sampler = Sampler::new(cmdp);
    let mut q_r = Vec::with_capacity(points.len());
    let mut q_c = Vec::with_capacity(points.len());
    for (i, &(s, a)) in points.iter().enumerate() {
        let mut sum_r = 0.0;
        let mut sum_c = 0.0;
        for j in 0..m {
            let mut rng = seeding::rng(seeding::derive(master_seed, i as u64, j as u64));
            let (r, c) = sample_returns(&sampler, policy, (s, a), horizon, &mut rng);
            sum_r += r;
            sum_c += c;
        }
        q_r.push(sum_r / m as f64);
        q_c.push(sum_c / m as f64);
    }
    Ok((q_r, q_c))
}

/// Weighted least-squares fit of targets `q` on the coreset's features.
///
/// Solves `min_theta sum_z omega(z) (<theta, phi(z)> - q(z))^2` through the
/// weighted Gram pseudoinverse when it has full rank; a rank-deficient Gram
/// matrix falls back to the ridge `nu` carried by the coreset.
pub fn wls_fit(coreset: &Coreset, q: &[f64]) -> Result<Vec<f64>, EstimationError> {
    if q.len() != coreset.len() {
        return Err(EstimationError::TargetCount {
            got: q.len(),
            expected: coreset.len(),
        });
    }
    let d = coreset.dim();
    let mut rhs = DVector::zeros(d);
    for ((phi, &w), &target) in coreset.point_features().iter().zip(&coreset.omega).zip(q) {
        rhs += phi * (w * target);
    }
    let theta = if coreset.gram_nonsingular() {
        coreset.gram_pinv() * rhs
    } else {
        let ridged = &coreset.gram + DMatrix::identity(d, d) * coreset.nu;
        ridged
            .lu()
            .solve(&rhs)
            .ok_or(EstimationError::SolveFailed)?
    };
    Ok(theta.iter().copied().collect())
}

/// `(Q_hat_r, Q_hat_c)` at one pair via the fitted weights.
pub fn predict_q(estimate: &QEstimate, s: usize, a: usize) -> (f64, f64) {
    let phi = estimate.features.featurize(s, a);
    (
        crate::eval::dot(&estimate.theta_r, &phi),
        crate::eval::dot(&estimate.theta_c, &phi),
    )
}

/// Full extrapolated tables for both signals.
pub fn extrapolate_tables(estimate: &QEstimate, n_states: usize, n_actions: usize) -> (QFn, QFn) {
    let mut q_r = Vec::with_capacity(n_states * n_actions);
    let mut q_c = Vec::with_capacity(n_states * n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            let (r, c) = predict_q(estimate, s, a);
            q_r.push(r);
            q_c.push(c);
        }
    }
    (
        QFn::from_table(n_states, n_actions, q_r),
        QFn::from_table(n_states, n_actions, q_c),
    )
}

/// Extrapolates a weight vector to a full `Q[s][a]` table.
pub fn extrapolate_table(
    theta: &[f64],
    features: &FeatureMap,
    n_states: usize,
    n_actions: usize,
) -> QFn {
    QFn::from_fn(n_states, n_actions, |s, a| {
        crate::eval::dot(theta, &features.featurize(s, a))
    })
}

/// Exact model-based estimator: the true action-value tables behind the same
/// interface as the sampled path, so solvers can run with zero estimation
/// error.
pub fn exact_estimator(cmdp: &TabularCmdp, policy: &Policy) -> Result<(QFn, QFn), EvalError> {
    let (_, q_r) = exact_eval(cmdp, policy, Signal::Reward)?;
    let (_, q_c) = exact_eval(cmdp, policy, Signal::Constraint)?;
    Ok((q_r, q_c))
}

/// Estimated constraint value `sum_s rho(s) sum_a pi(a|s) Q_hat_c(s, a)`,
/// the quantity every dual update consumes.
pub fn estimate_constraint_value(rho: &[f64], policy: &Policy, q_hat_c: &QFn) -> f64 {
    let mut total = 0.0;
    for (s, &w) in rho.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for a in 0..policy.n_actions {
            inner += policy.prob(s, a) * q_hat_c.get(s, a);
        }
        total += w * inner;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_coreset, coreset_from_points};
    use crate::envs::{make_gridworld, make_random_cmdp, RhoSpec};
    use crate::eval::scalar_value;

    #[test]
    fn horizon_formula() {
        // gamma = 0.9, eps = 1e-3: gamma^H / (1 - gamma) <= 1e-3 first at H = 88
        let h = truncation_horizon(0.9, 1e-3);
        assert_eq!(h, 88);
        assert!(0.9f64.powi(h as i32) / 0.1 <= 1e-3);
        assert!(0.9f64.powi(h as i32 - 1) / 0.1 > 1e-3);
    }

    #[test]
    fn deterministic_single_state_estimate_is_exact() {
        let cmdp =
            TabularCmdp::new(1, 1, vec![1.0], vec![1.0], vec![0.0], 0.0, vec![1.0], 0.9).unwrap();
        let pi = Policy::uniform(1, 1);
        let h = 25;
        let (q_r, _) = rollout_q_estimates(&cmdp, &pi, &[(0, 0)], 3, h, 7).unwrap();
        let expected = (1.0 - 0.9f64.powi(h as i32)) / 0.1;
        assert!((q_r[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn same_seed_means_same_estimates() {
        let cmdp = make_random_cmdp(4, 2, 0.9, 5);
        let pi = Policy::uniform(4, 2);
        let points = vec![(0, 0), (1, 1), (3, 0)];
        let a = rollout_q_estimates(&cmdp, &pi, &points, 1, 20, 99).unwrap();
        let b = rollout_q_estimates(&cmdp, &pi, &points, 1, 20, 99).unwrap();
        assert_eq!(a, b);
        let c = rollout_q_estimates(&cmdp, &pi, &points, 1, 20, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truncation_bias_bound_on_deterministic_chain() {
        // two-state loop with rewards 1 and 0; exact value minus truncated
        // return is at most gamma^H / (1 - gamma)
        let cmdp = TabularCmdp::new(
            2,
            1,
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            0.0,
            vec![1.0, 0.0],
            0.9,
        )
        .unwrap();
        let pi = Policy::uniform(2, 1);
        let exact = scalar_value(&cmdp, &pi, Signal::Reward).unwrap();
        for h in [5usize, 20, 60] {
            let (q_r, _) = rollout_q_estimates(&cmdp, &pi, &[(0, 0)], 1, h, 0).unwrap();
            let gap = (exact - q_r[0]).abs();
            assert!(gap <= 0.9f64.powi(h as i32) / 0.1 + 1e-12);
        }
    }

    #[test]
    fn single_rollout_mean_is_unbiased() {
        let cmdp = make_random_cmdp(4, 2, 0.8, 21);
        let pi = Policy::uniform(4, 2);
        let (_, q_exact) = exact_eval(&cmdp, &pi, Signal::Reward).unwrap();
        let (s, a) = (1, 0);
        let h = truncation_horizon(0.8, 1e-6);
        let n = 10_000;
        let (est, _) = rollout_q_estimates(&cmdp, &pi, &[(s, a)], n, h, 12).unwrap();
        // single-trajectory returns lie in [0, 5]; se of the mean over n draws
        let se = 5.0 / (n as f64).sqrt();
        assert!(
            (est[0] - q_exact.get(s, a)).abs() <= 3.0 * se,
            "estimate {} vs exact {}",
            est[0],
            q_exact.get(s, a)
        );
    }

    #[test]
    fn wls_single_point_closed_form() {
        // one scalar feature 2.0 with target 6.0: theta = 3, prediction 6
        let phi = FeatureMap::from_table(1, 1, 1, vec![vec![2.0]]).unwrap();
        let coreset = coreset_from_points(&phi, &[(0, 0)], 1.0).unwrap();
        let theta = wls_fit(&coreset, &[6.0]).unwrap();
        assert!((theta[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn wls_one_hot_reproduces_targets() {
        let phi = FeatureMap::one_hot(2, 2);
        let pairs = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let coreset = coreset_from_points(&phi, &pairs, 1.0).unwrap();
        let targets = vec![1.0, -2.0, 0.25, 8.0];
        let theta = wls_fit(&coreset, &targets).unwrap();
        for (i, &(s, a)) in pairs.iter().enumerate() {
            let pred = crate::eval::dot(&theta, &phi.featurize(s, a));
            assert!((pred - targets[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn wls_matches_direct_normal_equations() {
        let grid = make_gridworld(0.9, None, &RhoSpec::Uniform).unwrap();
        let phi = FeatureMap::tile_coding((5, 5), 4, (2, 2), 1, None).unwrap();
        let pairs = grid.state_action_pairs();
        let coreset = build_coreset(&phi, &pairs, 0.7, 1.0).unwrap();
        let mut rng = crate::seeding::rng(4);
        use rand::Rng;
        let targets: Vec<f64> = (0..coreset.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let theta = wls_fit(&coreset, &targets).unwrap();

        // direct dense solve of the same weighted system
        let d = phi.dim();
        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for (k, f) in coreset.point_features().iter().enumerate() {
            gram += f * f.transpose() * coreset.omega[k];
            rhs += f * (coreset.omega[k] * targets[k]);
        }
        let direct = if coreset.gram_nonsingular() {
            gram.lu().solve(&rhs).unwrap()
        } else {
            (gram + DMatrix::identity(d, d) * coreset.nu)
                .lu()
                .solve(&rhs)
                .unwrap()
        };
        for (a, b) in theta.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // stationarity of the (possibly ridged) objective
        let theta_v = DVector::from_vec(theta.clone());
        let mut grad = &coreset.gram * &theta_v - rhs;
        if !coreset.gram_nonsingular() {
            grad += &theta_v * coreset.nu;
        }
        assert!(grad.amax() < 1e-8);
    }

    #[test]
    fn predictions_are_linear_in_theta() {
        let features = FeatureMap::tile_coding((2, 2), 2, (1, 2), 1, None).unwrap();
        let meta = EstimateMeta {
            m: 1,
            horizon: 1,
            seed: 0,
            delta: 0.05,
        };
        let zero = QEstimate {
            theta_r: vec![0.0; features.dim()],
            theta_c: vec![0.0; features.dim()],
            features: features.clone(),
            meta,
        };
        assert_eq!(predict_q(&zero, 1, 1), (0.0, 0.0));

        let theta: Vec<f64> = (0..features.dim()).map(|i| i as f64 - 1.5).collect();
        let scaled = QEstimate {
            theta_r: theta.iter().map(|t| 3.0 * t).collect(),
            theta_c: theta.clone(),
            features: features.clone(),
            meta,
        };
        for s in 0..4 {
            for a in 0..2 {
                let (r, c) = predict_q(&scaled, s, a);
                assert!((r - 3.0 * c).abs() < 1e-12, "homogeneity at ({s},{a})");
            }
        }
    }

    #[test]
    fn predictions_match_independent_inner_product() {
        // recompute <theta, phi> per pair by iterating the active indices,
        // bypassing the dense dot product in predict_q
        let grid = make_gridworld(0.9, None, &RhoSpec::Uniform).unwrap();
        let features = FeatureMap::tile_coding((5, 5), 4, (1, 3), 1, None).unwrap();
        let coreset = build_coreset(&features, &grid.state_action_pairs(), 0.75, 1.0).unwrap();
        let pi = Policy::uniform(25, 4);
        let (_, q_c) = exact_eval(&grid, &pi, Signal::Constraint).unwrap();
        let targets: Vec<f64> = coreset.points.iter().map(|&(s, a)| q_c.get(s, a)).collect();
        let theta = wls_fit(&coreset, &targets).unwrap();
        let estimate = QEstimate {
            theta_r: theta.clone(),
            theta_c: theta.clone(),
            features: features.clone(),
            meta: EstimateMeta {
                m: 1,
                horizon: 1,
                seed: 0,
                delta: 0.05,
            },
        };
        for (s, a) in grid.state_action_pairs() {
            let sparse: f64 = features
                .active_indices(s, a)
                .iter()
                .map(|&i| theta[i])
                .sum();
            let (dense, _) = predict_q(&estimate, s, a);
            assert!((sparse - dense).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_constraint_value_point_mass() {
        let cmdp = make_random_cmdp(4, 2, 0.9, 2);
        let pi = Policy::uniform(4, 2);
        let (v_c, q_c) = exact_eval(&cmdp, &pi, Signal::Constraint).unwrap();
        let mut rho = vec![0.0; 4];
        rho[2] = 1.0;
        let est = estimate_constraint_value(&rho, &pi, &q_c);
        assert!((est - v_c.get(2)).abs() < 1e-10);
    }

    #[test]
    fn constant_q_table_gives_threshold_value() {
        // Q_hat_c == b (1 - gamma) analog: with a constant table the estimate
        // is that constant for any policy and rho
        let q = QFn::from_table(1, 2, vec![0.3, 0.3]);
        let pi = Policy::uniform(1, 2);
        let est = estimate_constraint_value(&[1.0], &pi, &q);
        assert!((est - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exact_estimator_matches_exact_eval() {
        let cmdp = make_random_cmdp(5, 3, 0.9, 8);
        let pi = Policy::uniform(5, 3);
        let (q_r, q_c) = exact_estimator(&cmdp, &pi).unwrap();
        let (_, q_r2) = exact_eval(&cmdp, &pi, Signal::Reward).unwrap();
        let (_, q_c2) = exact_eval(&cmdp, &pi, Signal::Constraint).unwrap();
        assert_eq!(q_r, q_r2);
        assert_eq!(q_c, q_c2);
    }
}
