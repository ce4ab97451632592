//! Benchmark CMDP constructors and a seeded trajectory sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::scalar_value;
use crate::model::{ModelError, Policy, Signal, TabularCmdp};
use crate::oracle::value_iteration;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("threshold {b} is not attainable: max_pi J_c = {max_jc}")]
    UnattainableThreshold { b: f64, max_jc: f64 },
    #[error("evaluation failed while deriving the default threshold: {0}")]
    Eval(#[from] crate::eval::EvalError),
}

/// Initial state distribution choices for the constructors.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoSpec {
    Uniform,
    Point(usize),
    Custom(Vec<f64>),
}

impl RhoSpec {
    fn build(&self, n_states: usize) -> Vec<f64> {
        match self {
            RhoSpec::Uniform => vec![1.0 / n_states as f64; n_states],
            RhoSpec::Point(s) => {
                let mut rho = vec![0.0; n_states];
                rho[*s] = 1.0;
                rho
            }
            RhoSpec::Custom(v) => v.clone(),
        }
    }
}

pub const GRID_SIDE: usize = 5;
pub const GRID_ACTIONS: usize = 4; // N, S, E, W

/// The 5x5 gridworld benchmark.
///
/// All moves are deterministic with zero reward and zero constraint reward;
/// moving off the grid leaves the state unchanged. Two special cells
/// teleport under every action: A = (0,1) jumps to (4,1) with `(r, c) =
/// (1, 0.1)` and B = (0,3) jumps to (2,3) with `(r, c) = (0.5, 1.0)`.
///
/// `b = None` picks the default threshold `0.5 * max_pi J_c`, which keeps the
/// constraint active but strictly feasible; an explicit `b` is rejected if no
/// policy can attain it.
pub fn make_gridworld(gamma: f64, b: Option<f64>, rho: &RhoSpec) -> Result<TabularCmdp, EnvError> {
    let n = GRID_SIDE * GRID_SIDE;
    let na = GRID_ACTIONS;
    let state = |row: usize, col: usize| row * GRID_SIDE + col;
    let special_a = state(0, 1);
    let special_a_target = state(4, 1);
    let special_b = state(0, 3);
    let special_b_target = state(2, 3);

    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    let mut constraint = vec![0.0; n * na];
    for row in 0..GRID_SIDE {
        for col in 0..GRID_SIDE {
            let s = state(row, col);
            for a in 0..na {
                let (next, r, c) = if s == special_a {
                    (special_a_target, 1.0, 0.1)
                } else if s == special_b {
                    (special_b_target, 0.5, 1.0)
                } else {
                    let (nr, nc) = match a {
                        0 => (row.wrapping_sub(1), col), // north
                        1 => (row + 1, col),             // south
                        2 => (row, col + 1),             // east
                        _ => (row, col.wrapping_sub(1)), // west
                    };
                    if nr < GRID_SIDE && nc < GRID_SIDE {
                        (state(nr, nc), 0.0, 0.0)
                    } else {
                        (s, 0.0, 0.0)
                    }
                };
                transition[(s * na + a) * n + next] = 1.0;
                reward[s * na + a] = r;
                constraint[s * na + a] = c;
            }
        }
    }

    let mut cmdp = TabularCmdp::new(
        n,
        na,
        transition,
        reward,
        constraint,
        0.0,
        rho.build(n),
        gamma,
    )?;
    let max_jc = value_iteration(&cmdp, 0.0, 1.0).scalar;
    let threshold = match b {
        Some(b) => {
            if b >= max_jc {
                return Err(EnvError::UnattainableThreshold { b, max_jc });
            }
            b
        }
        None => 0.5 * max_jc,
    };
    cmdp.threshold = threshold;
    Ok(cmdp)
}

/// Random dense CMDP: transition rows from a symmetric Dirichlet, rewards
/// uniform in `[0, 1]`, uniform `rho`, and `b = J_c(uniform policy)` so the
/// instance is always feasible. Deterministic per seed.
pub fn make_random_cmdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularCmdp {
    make_random_cmdp_sparse(n_states, n_actions, gamma, seed, 0.0)
}

/// Random CMDP whose transition rows drop roughly `sparsity` of their
/// entries (at least one survives) before normalization.
pub fn make_random_cmdp_sparse(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    seed: u64,
    sparsity: f64,
) -> TabularCmdp {
    let mut rng = crate::seeding::rng(crate::seeding::derive(seed, 0xE27, 0));
    let n = n_states;
    let na = n_actions;
    let mut transition = vec![0.0; n * na * n];
    for s in 0..n {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * n..(s * na + a + 1) * n];
            // Dirichlet(1) via normalized exponentials
            let mut sum = 0.0;
            for v in row.iter_mut() {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let keep = sparsity <= 0.0 || rng.gen::<f64>() >= sparsity;
                *v = if keep { -u.ln() } else { 0.0 };
                sum += *v;
            }
            if sum == 0.0 {
                let pick = rng.gen_range(0..n);
                row[pick] = 1.0;
                sum = 1.0;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    let reward: Vec<f64> = (0..n * na).map(|_| rng.gen::<f64>()).collect();
    let constraint: Vec<f64> = (0..n * na).map(|_| rng.gen::<f64>()).collect();
    let mut cmdp = TabularCmdp::new(
        n,
        na,
        transition,
        reward,
        constraint,
        0.0,
        vec![1.0 / n as f64; n],
        gamma,
    )
    .expect("random CMDP construction is valid by construction");
    let uniform = Policy::uniform(n, na);
    cmdp.threshold = scalar_value(&cmdp, &uniform, Signal::Constraint)
        .expect("evaluating the uniform policy cannot fail");
    cmdp
}

enum TransitionRow {
    Deterministic(usize),
    Cdf(Vec<f64>),
}

/// Precomputed transition sampler; point-mass rows skip the CDF walk.
pub struct Sampler<'a> {
    cmdp: &'a TabularCmdp,
    rows: Vec<TransitionRow>,
}

impl<'a> Sampler<'a> {
    pub fn new(cmdp: &'a TabularCmdp) -> Self {
        let n = cmdp.n_states;
        let rows = (0..cmdp.n_states * cmdp.n_actions)
            .map(|idx| {
                let row = &cmdp.transition[idx * n..(idx + 1) * n];
                if let Some(hot) = row.iter().position(|&p| p >= 1.0 - 1e-12) {
                    TransitionRow::Deterministic(hot)
                } else {
                    let mut cdf = Vec::with_capacity(n);
                    let mut acc = 0.0;
                    for &p in row {
                        acc += p;
                        cdf.push(acc);
                    }
                    TransitionRow::Cdf(cdf)
                }
            })
            .collect();
        Self { cmdp, rows }
    }

    #[inline]
    pub fn step(&self, s: usize, a: usize, rng: &mut ChaCha8Rng) -> usize {
        match &self.rows[s * self.cmdp.n_actions + a] {
            TransitionRow::Deterministic(next) => *next,
            TransitionRow::Cdf(cdf) => {
                let u: f64 = rng.gen();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
            }
        }
    }

    #[inline]
    fn sample_action(&self, policy: &Policy, s: usize, rng: &mut ChaCha8Rng) -> usize {
        let row = policy.row(s);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        row.len() - 1
    }
}

/// One truncated trajectory: discounted returns for both signals and the
/// states entered along the way.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub return_r: f64,
    pub return_c: f64,
    pub visited: Vec<usize>,
}

/// Rolls out `horizon` steps: the first transition takes `start.1` from
/// `start.0`, subsequent actions come from `policy`.
pub fn sample_rollout(
    sampler: &Sampler,
    policy: &Policy,
    start: (usize, usize),
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Rollout {
    let (mut s, mut a) = start;
    let mut visited = Vec::with_capacity(horizon + 1);
    visited.push(s);
    let mut return_r = 0.0;
    let mut return_c = 0.0;
    let mut disc = 1.0;
    for h in 0..horizon {
        return_r += disc * sampler.cmdp.r(s, a);
        return_c += disc * sampler.cmdp.c(s, a);
        disc *= sampler.cmdp.gamma;
        s = sampler.step(s, a, rng);
        if h + 1 < horizon {
            a = sampler.sample_action(policy, s, rng);
            visited.push(s);
        }
    }
    Rollout {
        return_r,
        return_c,
        visited,
    }
}

/// Lightweight rollout accumulating only the two discounted returns.
pub fn sample_returns(
    sampler: &Sampler,
    policy: &Policy,
    start: (usize, usize),
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (mut s, mut a) = start;
    let mut return_r = 0.0;
    let mut return_c = 0.0;
    let mut disc = 1.0;
    for h in 0..horizon {
        return_r += disc * sampler.cmdp.r(s, a);
        return_c += disc * sampler.cmdp.c(s, a);
        disc *= sampler.cmdp.gamma;
        s = sampler.step(s, a, rng);
        if h + 1 < horizon {
            a = sampler.sample_action(policy, s, rng);
        }
    }
    (return_r, return_c)
}
