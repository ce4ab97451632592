//! Exact policy evaluation and occupancy measures via dense linear solves.
//!
//! At desk scale (a few hundred states) the Bellman system `(I - gamma P_pi) V
//! = r_pi` is solved directly with LU; no iterative or sparse path.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{OccupancyMeasure, Policy, QFn, Signal, TabularCmdp, ValueFn};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("discount factor must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("linear solve failed: {0}")]
    SingularSystem(&'static str),
    #[error("Bellman residual {0} exceeds tolerance")]
    ResidualTooLarge(f64),
}

/// State-to-state transition matrix of `policy`: `P_pi[s][s'] = sum_a pi(a|s) P(s'|s,a)`.
pub fn policy_transition(cmdp: &TabularCmdp, policy: &Policy) -> DMatrix<f64> {
    let n = cmdp.n_states;
    DMatrix::from_fn(n, n, |s, next| {
        let mut p = 0.0;
        for a in 0..cmdp.n_actions {
            p += policy.prob(s, a) * cmdp.p(s, a, next);
        }
        p
    })
}

/// Per-state expected one-step signal under `policy`.
pub fn policy_signal(cmdp: &TabularCmdp, policy: &Policy, signal: Signal) -> DVector<f64> {
    let table = cmdp.signal_table(signal);
    DVector::from_fn(cmdp.n_states, |s, _| {
        let mut v = 0.0;
        for a in 0..cmdp.n_actions {
            v += policy.prob(s, a) * table[s * cmdp.n_actions + a];
        }
        v
    })
}

/// Exact `(V, Q)` of `policy` for the requested signal.
///
/// Solves `(I - gamma P_pi) V = r_pi` by LU and sets
/// `Q(s,a) = r(s,a) + gamma sum_{s'} P(s'|s,a) V(s')`. The returned values
/// satisfy the Bellman equation to within `1e-9` in max norm.
pub fn exact_eval(
    cmdp: &TabularCmdp,
    policy: &Policy,
    signal: Signal,
) -> Result<(ValueFn, QFn), EvalError> {
    if !(0.0..1.0).contains(&cmdp.gamma) {
        return Err(EvalError::InvalidDiscount(cmdp.gamma));
    }
    let n = cmdp.n_states;
    let p_pi = policy_transition(cmdp, policy);
    let r_pi = policy_signal(cmdp, policy, signal);
    let system = DMatrix::identity(n, n) - &p_pi * cmdp.gamma;
    let v = system
        .lu()
        .solve(&r_pi)
        .ok_or(EvalError::SingularSystem("(I - gamma P_pi) not invertible"))?;

    // residual check: gamma < 1 makes the system well conditioned, so any
    // excess here indicates a real bug upstream
    let residual = (&r_pi + cmdp.gamma * &p_pi * &v - &v).amax();
    if residual > 1e-9 {
        return Err(EvalError::ResidualTooLarge(residual));
    }

    let table = cmdp.signal_table(signal);
    let q = QFn::from_fn(n, cmdp.n_actions, |s, a| {
        let mut next_v = 0.0;
        for next in 0..n {
            next_v += cmdp.p(s, a, next) * v[next];
        }
        table[s * cmdp.n_actions + a] + cmdp.gamma * next_v
    });
    Ok((ValueFn(v.iter().copied().collect()), q))
}

/// `rho`-weighted scalar value `J = <rho, V>` of `policy` for `signal`.
pub fn scalar_value(cmdp: &TabularCmdp, policy: &Policy, signal: Signal) -> Result<f64, EvalError> {
    let (v, _) = exact_eval(cmdp, policy, signal)?;
    Ok(dot(&cmdp.rho, &v.0))
}

/// Normalized discounted occupancy `nu = (1 - gamma) rho (I - gamma P_pi)^{-1}`.
pub fn discounted_occupancy(
    cmdp: &TabularCmdp,
    policy: &Policy,
) -> Result<OccupancyMeasure, EvalError> {
    if !(0.0..1.0).contains(&cmdp.gamma) {
        return Err(EvalError::InvalidDiscount(cmdp.gamma));
    }
    let n = cmdp.n_states;
    let p_pi = policy_transition(cmdp, policy);
    // row-vector solve: transpose the system
    let system = (DMatrix::identity(n, n) - &p_pi * cmdp.gamma).transpose();
    let rho = DVector::from_column_slice(&cmdp.rho);
    let x = system.lu().solve(&rho).ok_or(EvalError::SingularSystem(
        "(I - gamma P_pi)^T not invertible",
    ))?;
    let state_dist: Vec<f64> = x.iter().map(|&v| (1.0 - cmdp.gamma) * v).collect();
    let mut state_action = vec![0.0; n * cmdp.n_actions];
    for s in 0..n {
        for a in 0..cmdp.n_actions {
            state_action[s * cmdp.n_actions + a] = state_dist[s] * policy.prob(s, a);
        }
    }
    Ok(OccupancyMeasure {
        state_dist,
        state_action,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TabularCmdp;

    fn single_state(gamma: f64, r: f64) -> TabularCmdp {
        TabularCmdp::new(1, 1, vec![1.0], vec![r], vec![r], 0.0, vec![1.0], gamma).unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let cmdp = single_state(0.9, 1.0);
        let pi = Policy::uniform(1, 1);
        let (v, q) = exact_eval(&cmdp, &pi, Signal::Reward).unwrap();
        assert!((v.get(0) - 10.0).abs() < 1e-9);
        assert!((q.get(0, 0) - 10.0).abs() < 1e-9);
        assert!((scalar_value(&cmdp, &pi, Signal::Reward).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_reward_is_zero_value() {
        let cmdp = single_state(0.9, 0.0);
        let pi = Policy::uniform(1, 1);
        let (v, q) = exact_eval(&cmdp, &pi, Signal::Reward).unwrap();
        assert_eq!(v.get(0), 0.0);
        assert_eq!(q.get(0, 0), 0.0);
    }

    #[test]
    fn point_mass_rho_reads_single_state() {
        // two disconnected states with different rewards
        let cmdp = TabularCmdp::new(
            2,
            1,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            0.0,
            vec![1.0, 0.0],
            0.5,
        )
        .unwrap();
        let pi = Policy::uniform(2, 1);
        let j = scalar_value(&cmdp, &pi, Signal::Reward).unwrap();
        assert!((j - 2.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_of_single_state_is_one() {
        let cmdp = single_state(0.9, 1.0);
        let pi = Policy::uniform(1, 1);
        let nu = discounted_occupancy(&cmdp, &pi).unwrap();
        assert!((nu.state(0) - 1.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use crate::envs::make_random_cmdp;
        use proptest::prelude::*;

        fn arbitrary_policy(n_states: usize, n_actions: usize) -> impl Strategy<Value = Policy> {
            proptest::collection::vec(0.01f64..1.0, n_states * n_actions).prop_map(
                move |mut weights| {
                    for row in weights.chunks_mut(n_actions) {
                        let sum: f64 = row.iter().sum();
                        row.iter_mut().for_each(|w| *w /= sum);
                    }
                    Policy::from_rows(n_states, n_actions, weights).unwrap()
                },
            )
        }

        proptest! {
            // V(s) = <pi(.|s), Q(s,.)> for exact evaluation output
            #[test]
            fn bellman_consistency(
                seed in 0u64..500,
                policy in arbitrary_policy(5, 3),
            ) {
                let cmdp = make_random_cmdp(5, 3, 0.9, seed);
                let ceiling = 1.0 / (1.0 - cmdp.gamma);
                for signal in [Signal::Reward, Signal::Constraint] {
                    let (v, q) = exact_eval(&cmdp, &policy, signal).unwrap();
                    for s in 0..5 {
                        prop_assert!((-1e-9..=ceiling + 1e-9).contains(&v.get(s)));
                        let mixed: f64 =
                            (0..3).map(|a| policy.prob(s, a) * q.get(s, a)).sum();
                        prop_assert!((mixed - v.get(s)).abs() <= 1e-9);
                    }
                }
            }

            // (1/(1-gamma)) sum_s nu(s) sum_a pi(a|s) r(s,a) = <rho, V>
            #[test]
            fn occupancy_duality(
                seed in 0u64..500,
                policy in arbitrary_policy(5, 3),
            ) {
                let cmdp = make_random_cmdp(5, 3, 0.9, seed);
                let nu = discounted_occupancy(&cmdp, &policy).unwrap();
                let mass: f64 = nu.state_dist.iter().sum();
                prop_assert!((mass - 1.0).abs() <= 1e-9);
                prop_assert!(nu.state_dist.iter().all(|&p| p >= 0.0));
                let mut weighted = 0.0;
                for s in 0..5 {
                    for a in 0..3 {
                        weighted += nu.state(s) * policy.prob(s, a) * cmdp.r(s, a);
                    }
                }
                let j = scalar_value(&cmdp, &policy, Signal::Reward).unwrap();
                prop_assert!((weighted / (1.0 - cmdp.gamma) - j).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn occupancy_of_absorbing_pair_matches_rho() {
        let cmdp = TabularCmdp::new(
            2,
            2,
            vec![
                1.0, 0.0, 1.0, 0.0, // state 0 absorbs under both actions
                0.0, 1.0, 0.0, 1.0, // state 1 absorbs under both actions
            ],
            vec![0.0; 4],
            vec![0.0; 4],
            0.0,
            vec![0.3, 0.7],
            0.9,
        )
        .unwrap();
        let pi = Policy::from_rows(2, 2, vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        let nu = discounted_occupancy(&cmdp, &pi).unwrap();
        assert!((nu.state(0) - 0.3).abs() < 1e-9);
        assert!((nu.state(1) - 0.7).abs() < 1e-9);
    }
}
