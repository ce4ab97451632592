//! Independent ground-truth solvers used to certify the iterative methods:
//! a constrained LP over occupancy measures, value iteration on weighted
//! rewards, a dual-variable scan, and the Chebyshev best-linear-fit LP.

pub mod simplex;

use thiserror::Error;

use crate::eval::dot;
use crate::features::FeatureMap;
use crate::model::{Policy, QFn, TabularCmdp, ValueFn};
use simplex::{solve_lp, LpError, LpOutcome, LpRow, Sense};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no occupancy measure satisfies the constraint (threshold {threshold})")]
    Infeasible { threshold: f64 },
    #[error("numerical failure in oracle: {0}")]
    Numerical(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Solution of the occupancy-measure LP.
///
/// `occupancy` is the unnormalized discounted occupancy (it sums to
/// `1/(1-gamma)`), so `J_r* = sum mu r` without extra factors.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub occupancy: Vec<f64>,
    pub optimal_policy: Policy,
    pub j_r_star: f64,
    pub j_c_star: f64,
}

/// Maximizes `sum mu r` subject to flow conservation, `mu >= 0` and
/// `sum mu c >= b`; recovers the optimal policy as `pi(a|s) = mu(s,a) /
/// sum_a mu(s,a)` (uniform where the state is unvisited).
pub fn solve_constrained_lp(cmdp: &TabularCmdp) -> Result<LpSolution, OracleError> {
    let n = cmdp.n_states;
    let na = cmdp.n_actions;
    let n_vars = n * na;
    let col = |s: usize, a: usize| s * na + a;

    let mut rows = Vec::with_capacity(n + 1);
    for next in 0..n {
        let mut coeffs = vec![0.0; n_vars];
        for s in 0..n {
            for a in 0..na {
                let mut v = -cmdp.gamma * cmdp.p(s, a, next);
                if s == next {
                    v += 1.0;
                }
                coeffs[col(s, a)] = v;
            }
        }
        rows.push(LpRow {
            coeffs,
            sense: Sense::Eq,
            rhs: cmdp.rho[next],
        });
    }
    rows.push(LpRow {
        coeffs: cmdp.constraint_reward.clone(),
        sense: Sense::Ge,
        rhs: cmdp.threshold,
    });

    let objective: Vec<f64> = cmdp.reward.iter().map(|&r| -r).collect();
    let mu = match solve_lp(&objective, &rows)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Err(OracleError::Infeasible {
                threshold: cmdp.threshold,
            })
        }
        // the feasible occupancy set is compact, so this cannot happen
        LpOutcome::Unbounded => {
            return Err(OracleError::Numerical(
                "occupancy LP reported unbounded".into(),
            ))
        }
    };

    // flow-conservation residuals certify the simplex output
    for next in 0..n {
        let mut flow: f64 = (0..na).map(|a| mu[col(next, a)]).sum();
        for s in 0..n {
            for a in 0..na {
                flow -= cmdp.gamma * cmdp.p(s, a, next) * mu[col(s, a)];
            }
        }
        if (flow - cmdp.rho[next]).abs() > 1e-7 {
            return Err(OracleError::Numerical(format!(
                "flow residual {} at state {next}",
                (flow - cmdp.rho[next]).abs()
            )));
        }
    }

    let mut probs = vec![0.0; n_vars];
    for s in 0..n {
        let mass: f64 = (0..na).map(|a| mu[col(s, a)]).sum();
        for a in 0..na {
            probs[col(s, a)] = if mass > 1e-12 {
                mu[col(s, a)] / mass
            } else {
                1.0 / na as f64
            };
        }
        // renormalize away simplex round-off
        let row_sum: f64 = probs[s * na..(s + 1) * na].iter().sum();
        for a in 0..na {
            probs[col(s, a)] /= row_sum;
        }
    }
    let optimal_policy = Policy::from_rows(n, na, probs)
        .map_err(|e| OracleError::Numerical(format!("policy recovery: {e}")))?;

    Ok(LpSolution {
        j_r_star: dot(&cmdp.reward, &mu),
        j_c_star: dot(&cmdp.constraint_reward, &mu),
        occupancy: mu,
        optimal_policy,
    })
}

/// Value-iteration solution for the scalarized reward `w_r * r + w_c * c`.
#[derive(Debug, Clone)]
pub struct ViSolution {
    pub values: ValueFn,
    pub greedy: Policy,
    /// `<rho, V>` of the optimal values.
    pub scalar: f64,
}

/// Plain value iteration on `w_r * r + w_c * c` to a sup-norm Bellman
/// residual of `1e-10`; greedy ties break to the lowest action index.
pub fn value_iteration(cmdp: &TabularCmdp, w_r: f64, w_c: f64) -> ViSolution {
    let n = cmdp.n_states;
    let na = cmdp.n_actions;
    let table: Vec<f64> = cmdp
        .reward
        .iter()
        .zip(&cmdp.constraint_reward)
        .map(|(&r, &c)| w_r * r + w_c * c)
        .collect();

    let transition_row =
        |s: usize, a: usize| &cmdp.transition[(s * na + a) * n..(s * na + a + 1) * n];
    let mut v = vec![0.0; n];
    let mut next_v = vec![0.0; n];
    // diff <= tol implies a Bellman residual of at most gamma * tol
    let tol = 1e-10;
    for _ in 0..5_000_000usize {
        let mut diff: f64 = 0.0;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let q = table[s * na + a] + cmdp.gamma * dot(transition_row(s, a), &v);
                if q > best {
                    best = q;
                }
            }
            diff = diff.max((best - v[s]).abs());
            next_v[s] = best;
        }
        std::mem::swap(&mut v, &mut next_v);
        if diff <= tol {
            break;
        }
    }

    let mut actions = vec![0usize; n];
    for (s, slot) in actions.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..na {
            let q = table[s * na + a] + cmdp.gamma * dot(transition_row(s, a), &v);
            if q > best {
                best = q;
                *slot = a;
            }
        }
    }
    let greedy = Policy::deterministic(n, na, &actions);
    let scalar = dot(&cmdp.rho, &v);
    ViSolution {
        values: ValueFn(v),
        greedy,
        scalar,
    }
}

/// Slater-type margin `zeta = max_pi J_c - b`, computed exactly.
pub fn slater_constant(cmdp: &TabularCmdp) -> f64 {
    value_iteration(cmdp, 0.0, 1.0).scalar - cmdp.threshold
}

/// Projection cap `U = 2 / (zeta (1 - gamma))` for the dual iterates.
pub fn dual_cap_from_zeta(zeta: f64, gamma: f64) -> f64 {
    2.0 / (zeta * (1.0 - gamma))
}

#[derive(Debug, Clone)]
pub struct DualScanResult {
    pub lambda_hat_star: f64,
    /// `(lambda, d(lambda))` with `d(lambda) = max_pi [J_r + lambda (J_c - b)]`.
    pub dual_curve: Vec<(f64, f64)>,
}

/// Evaluates the dual function on `grid` and returns the grid minimizer.
pub fn lambda_star_scan(cmdp: &TabularCmdp, grid: &[f64]) -> DualScanResult {
    assert!(!grid.is_empty(), "lambda scan needs a nonempty grid");
    let mut dual_curve = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::INFINITY);
    for &lambda in grid {
        let d = value_iteration(cmdp, 1.0, lambda).scalar - lambda * cmdp.threshold;
        if d < best.1 {
            best = (lambda, d);
        }
        dual_curve.push((lambda, d));
    }
    DualScanResult {
        lambda_hat_star: best.0,
        dual_curve,
    }
}

/// Default scan grid: 401 points on `[0, 2U]`, so the Lemma-1 bound
/// `lambda* <= U/2` keeps the minimizer interior.
pub fn default_scan_grid(u: f64) -> Vec<f64> {
    let n = 401;
    (0..n)
        .map(|i| 2.0 * u * i as f64 / (n - 1) as f64)
        .collect()
}

/// Best max-norm linear fit of `q` over the feature map: solves
/// `min_theta max_z |q(z) - <theta, phi(z)>|` as an LP and returns
/// `(eps_b, theta_star)`.
pub fn chebyshev_eps_b(q: &QFn, features: &FeatureMap) -> Result<(f64, Vec<f64>), OracleError> {
    let d = features.dim();
    // variables: theta+ (d), theta- (d), t (1)
    let n_vars = 2 * d + 1;
    let mut rows = Vec::with_capacity(2 * q.n_states * q.n_actions);
    for s in 0..q.n_states {
        for a in 0..q.n_actions {
            let phi = features.featurize(s, a);
            let mut up = vec![0.0; n_vars];
            let mut lo = vec![0.0; n_vars];
            for (j, &p) in phi.iter().enumerate() {
                up[j] = p;
                up[d + j] = -p;
                lo[j] = -p;
                lo[d + j] = p;
            }
            up[2 * d] = 1.0;
            lo[2 * d] = 1.0;
            // <theta, phi> + t >= q   and   -<theta, phi> + t >= -q
            rows.push(LpRow {
                coeffs: up,
                sense: Sense::Ge,
                rhs: q.get(s, a),
            });
            rows.push(LpRow {
                coeffs: lo,
                sense: Sense::Ge,
                rhs: -q.get(s, a),
            });
        }
    }
    let mut objective = vec![0.0; n_vars];
    objective[2 * d] = 1.0;
    let x = match solve_lp(&objective, &rows)? {
        LpOutcome::Optimal { x, .. } => x,
        other => {
            return Err(OracleError::Numerical(format!(
                "Chebyshev LP did not reach an optimum: {other:?}"
            )))
        }
    };
    let theta: Vec<f64> = (0..d).map(|j| x[j] - x[d + j]).collect();
    let eps = x[2 * d];

    // the fit must actually achieve the reported error
    let mut achieved: f64 = 0.0;
    for s in 0..q.n_states {
        for a in 0..q.n_actions {
            let phi = features.featurize(s, a);
            achieved = achieved.max((q.get(s, a) - dot(&theta, &phi)).abs());
        }
    }
    if (achieved - eps).abs() > 1e-7 {
        return Err(OracleError::Numerical(format!(
            "Chebyshev LP value {eps} does not match achieved error {achieved}"
        )));
    }
    Ok((eps, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_random_cmdp;
    use crate::eval::scalar_value;
    use crate::model::Signal;

    #[test]
    fn value_iteration_geometric() {
        let cmdp =
            TabularCmdp::new(1, 1, vec![1.0], vec![1.0], vec![0.0], 0.0, vec![1.0], 0.5).unwrap();
        let vi = value_iteration(&cmdp, 1.0, 0.0);
        assert!((vi.scalar - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lp_with_inactive_constraint_matches_value_iteration() {
        for seed in 0..5 {
            let mut cmdp = make_random_cmdp(5, 3, 0.9, seed);
            cmdp.threshold = 0.0; // c >= 0, so the constraint row is inactive
            let lp = solve_constrained_lp(&cmdp).unwrap();
            let vi = value_iteration(&cmdp, 1.0, 0.0);
            assert!(
                (lp.j_r_star - vi.scalar).abs() < 1e-6,
                "seed {seed}: LP {} vs VI {}",
                lp.j_r_star,
                vi.scalar
            );
        }
    }

    #[test]
    fn lp_detects_unreachable_threshold() {
        let mut cmdp = make_random_cmdp(4, 2, 0.9, 3);
        cmdp.threshold = value_iteration(&cmdp, 0.0, 1.0).scalar + 0.5;
        assert!(matches!(
            solve_constrained_lp(&cmdp),
            Err(OracleError::Infeasible { .. })
        ));
    }

    #[test]
    fn lp_policy_reproduces_lp_values() {
        let cmdp = make_random_cmdp(6, 3, 0.9, 11);
        let lp = solve_constrained_lp(&cmdp).unwrap();
        let j_r = scalar_value(&cmdp, &lp.optimal_policy, Signal::Reward).unwrap();
        let j_c = scalar_value(&cmdp, &lp.optimal_policy, Signal::Constraint).unwrap();
        assert!((j_r - lp.j_r_star).abs() < 1e-6, "{j_r} vs {}", lp.j_r_star);
        assert!(j_c >= cmdp.threshold - 1e-7);
        assert!((j_c - lp.j_c_star).abs() < 1e-6);
    }

    #[test]
    fn scan_returns_zero_for_inactive_constraint() {
        let mut cmdp = make_random_cmdp(4, 2, 0.9, 7);
        cmdp.threshold = 0.0;
        let scan = lambda_star_scan(&cmdp, &default_scan_grid(1.0));
        assert_eq!(scan.lambda_hat_star, 0.0);
    }

    #[test]
    fn scan_single_point_grid() {
        let cmdp = make_random_cmdp(3, 2, 0.9, 1);
        let scan = lambda_star_scan(&cmdp, &[0.7]);
        assert_eq!(scan.lambda_hat_star, 0.7);
        assert_eq!(scan.dual_curve.len(), 1);
    }

    #[test]
    fn chebyshev_one_hot_is_exact() {
        let cmdp = make_random_cmdp(4, 3, 0.9, 5);
        let pi = Policy::uniform(4, 3);
        let (_, q) = crate::eval::exact_eval(&cmdp, &pi, Signal::Reward).unwrap();
        let phi = FeatureMap::one_hot(4, 3);
        let (eps, theta) = chebyshev_eps_b(&q, &phi).unwrap();
        assert!(eps.abs() < 1e-9, "one-hot eps_b was {eps}");
        // one-hot weight for pair (0, 1) sits at index 1
        assert!((theta[1] - q.get(0, 1)).abs() < 1e-8);
    }

    #[test]
    fn chebyshev_midpoint_of_two_targets() {
        // two points with identical scalar feature 1 and targets 1, 3
        let q = QFn::from_table(2, 1, vec![1.0, 3.0]);
        let phi = FeatureMap::from_table(2, 1, 1, vec![vec![1.0], vec![1.0]]).unwrap();
        let (eps, theta) = chebyshev_eps_b(&q, &phi).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-9);
        assert!((eps - 1.0).abs() < 1e-9);
    }
}
