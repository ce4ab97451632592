//! Core tabular CMDP types: the model itself, policies, value functions and
//! occupancy measures.

use thiserror::Error;

/// Tolerance for probability rows summing to one.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("discount factor must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("transition row for state {state}, action {action} sums to {sum}, expected 1")]
    TransitionRowNotStochastic {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("negative transition probability at ({state}, {action}, {next})")]
    NegativeTransition {
        state: usize,
        action: usize,
        next: usize,
    },
    #[error("{signal} value {value} at ({state}, {action}) outside [0, 1]")]
    SignalOutOfRange {
        signal: &'static str,
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("initial distribution is not a probability vector (sum {0})")]
    InvalidInitialDistribution(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("policy row for state {state} sums to {sum}, expected 1")]
    PolicyRowNotStochastic { state: usize, sum: f64 },
    #[error("negative policy probability at ({state}, {action})")]
    NegativePolicy { state: usize, action: usize },
    #[error("state space must be nonempty")]
    Empty,
}

/// Which scalar signal of the CMDP an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Constraint,
}

/// A finite discounted CMDP `(S, A, P, r, c, b, rho, gamma)`.
///
/// `transition` is stored flat as `[s][a][s']`, `reward` and
/// `constraint_reward` as `[s][a]`. Rewards live in `[0, 1]`; the threshold
/// `b` is in discounted-value units.
#[derive(Debug, Clone)]
pub struct TabularCmdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
    pub constraint_reward: Vec<f64>,
    pub threshold: f64,
    pub rho: Vec<f64>,
    pub gamma: f64,
}

impl TabularCmdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        constraint_reward: Vec<f64>,
        threshold: f64,
        rho: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, ModelError> {
        let cmdp = Self {
            n_states,
            n_actions,
            transition,
            reward,
            constraint_reward,
            threshold,
            rho,
            gamma,
        };
        cmdp.validate()?;
        Ok(cmdp)
    }

    /// Checks every type invariant; cheap enough to run on construction.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(ModelError::Empty);
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ModelError::InvalidDiscount(self.gamma));
        }
        let sa = self.n_states * self.n_actions;
        if self.transition.len() != sa * self.n_states {
            return Err(ModelError::DimensionMismatch(format!(
                "transition has {} entries, expected {}",
                self.transition.len(),
                sa * self.n_states
            )));
        }
        if self.reward.len() != sa || self.constraint_reward.len() != sa {
            return Err(ModelError::DimensionMismatch(format!(
                "reward tables must have {sa} entries"
            )));
        }
        if self.rho.len() != self.n_states {
            return Err(ModelError::DimensionMismatch(format!(
                "rho has {} entries, expected {}",
                self.rho.len(),
                self.n_states
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let mut sum = 0.0;
                for next in 0..self.n_states {
                    let p = self.p(s, a, next);
                    if p < 0.0 {
                        return Err(ModelError::NegativeTransition {
                            state: s,
                            action: a,
                            next,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(ModelError::TransitionRowNotStochastic {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                for (name, table) in [
                    ("reward", &self.reward),
                    ("constraint reward", &self.constraint_reward),
                ] {
                    let v = table[s * self.n_actions + a];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(ModelError::SignalOutOfRange {
                            signal: name,
                            state: s,
                            action: a,
                            value: v,
                        });
                    }
                }
            }
        }
        let rho_sum: f64 = self.rho.iter().sum();
        if self.rho.iter().any(|&p| p < 0.0) || (rho_sum - 1.0).abs() > PROB_TOL {
            return Err(ModelError::InvalidInitialDistribution(rho_sum));
        }
        Ok(())
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    #[inline]
    pub fn c(&self, s: usize, a: usize) -> f64 {
        self.constraint_reward[s * self.n_actions + a]
    }

    /// Per-step table of the requested signal.
    pub fn signal_table(&self, signal: Signal) -> &[f64] {
        match signal {
            Signal::Reward => &self.reward,
            Signal::Constraint => &self.constraint_reward,
        }
    }

    pub fn n_state_actions(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// All `(s, a)` pairs in enumeration order (row-major over states).
    pub fn state_action_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .collect()
    }
}

/// A memoryless stochastic policy: one probability row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Deterministic policy from one action index per state.
    pub fn deterministic(n_states: usize, n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn from_rows(
        n_states: usize,
        n_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if probs.len() != n_states * n_actions {
            return Err(ModelError::DimensionMismatch(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        let policy = Self {
            n_states,
            n_actions,
            probs,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for s in 0..self.n_states {
            let row = self.row(s);
            if let Some(a) = row.iter().position(|&p| p < 0.0) {
                return Err(ModelError::NegativePolicy {
                    state: s,
                    action: a,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(ModelError::PolicyRowNotStochastic { state: s, sum });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }
}

/// State value function `V[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn(pub Vec<f64>);

impl ValueFn {
    #[inline]
    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }
}

/// Action value table `Q[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFn {
    pub n_states: usize,
    pub n_actions: usize,
    data: Vec<f64>,
}

impl QFn {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_table(n_states: usize, n_actions: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_states * n_actions, "Q table size mismatch");
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    pub fn from_fn(
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.data
    }

    /// `self + lambda * other`, the Lagrangian combination used by the solvers.
    pub fn combine(&self, other: &QFn, lambda: f64) -> QFn {
        assert_eq!(self.data.len(), other.data.len());
        QFn {
            n_states: self.n_states,
            n_actions: self.n_actions,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&q_r, &q_c)| q_r + lambda * q_c)
                .collect(),
        }
    }

    /// Max-norm distance to another table.
    pub fn max_abs_diff(&self, other: &QFn) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized discounted state-visitation measure of a policy, together with
/// its state-action refinement `mu(s, a) = nu(s) pi(a|s)`.
#[derive(Debug, Clone)]
pub struct OccupancyMeasure {
    pub state_dist: Vec<f64>,
    pub state_action: Vec<f64>,
}

impl OccupancyMeasure {
    #[inline]
    pub fn state(&self, s: usize) -> f64 {
        self.state_dist[s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state_cmdp(gamma: f64) -> TabularCmdp {
        TabularCmdp::new(1, 1, vec![1.0], vec![1.0], vec![1.0], 0.0, vec![1.0], gamma).unwrap()
    }

    #[test]
    fn rejects_bad_discount() {
        let err = TabularCmdp::new(1, 1, vec![1.0], vec![1.0], vec![1.0], 0.0, vec![1.0], 1.0);
        assert!(matches!(err, Err(ModelError::InvalidDiscount(_))));
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let err = TabularCmdp::new(1, 1, vec![0.5], vec![1.0], vec![1.0], 0.0, vec![1.0], 0.9);
        assert!(matches!(
            err,
            Err(ModelError::TransitionRowNotStochastic { .. })
        ));
    }

    #[test]
    fn rejects_signal_out_of_range() {
        let err = TabularCmdp::new(1, 1, vec![1.0], vec![1.5], vec![1.0], 0.0, vec![1.0], 0.9);
        assert!(matches!(err, Err(ModelError::SignalOutOfRange { .. })));
    }

    #[test]
    fn accepts_valid_model() {
        let cmdp = single_state_cmdp(0.9);
        assert_eq!(cmdp.n_state_actions(), 1);
        assert_eq!(cmdp.p(0, 0, 0), 1.0);
    }

    #[test]
    fn policy_rows_validate() {
        let p = Policy::from_rows(2, 2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        assert_eq!(p.prob(0, 1), 0.75);
        assert!(Policy::from_rows(1, 2, vec![0.6, 0.6]).is_err());
        assert!(Policy::from_rows(1, 2, vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn q_combine_is_lagrangian() {
        let q_r = QFn::from_table(1, 2, vec![1.0, 2.0]);
        let q_c = QFn::from_table(1, 2, vec![0.5, 0.25]);
        let q_l = q_r.combine(&q_c, 2.0);
        assert_eq!(q_l.row(0), &[2.0, 2.5]);
    }
}
