//! Parameter-free coin-betting updates.
//!
//! The primal side runs one wealth recursion per `(s, a)`: with truncated
//! losses `l~_t = A_t 1{w_t > 0} + [A_t]_+ 1{w_t <= 0}` built from the
//! normalized advantage `A_t`, the bet is
//!
//! ```text
//! w_{t+1} = sum_{i<=t} l~_i / ((t+1) + T/2) * (1 + sum_{i<=t} l~_i w_i)
//! ```
//!
//! and the policy is `pi_{t+1}(a|s) ~ pi_0(a|s) [w_{t+1}(s,a)]_+`, falling
//! back to `pi_0(.|s)` when a row's positive mass vanishes.
//!
//! The dual side is a sigmoid bettor on the constraint deviations, plus the
//! adaptively normalized variant that trades the worst-case normalization
//! for a single scale parameter `alpha_lambda`.

use crate::model::{Policy, QFn};
use crate::solvers::SolverError;

/// Per-pair wealth recursion driving the coin-betting policy.
#[derive(Debug, Clone)]
pub struct PrimalCoinState {
    base: Policy,
    horizon: usize,
    t: usize,
    w: Vec<f64>,
    sum_losses: Vec<f64>,
    sum_loss_wealth: Vec<f64>,
    current: Policy,
}

impl PrimalCoinState {
    /// Starts at `w_0 = 0` for every pair, so the first policy is `pi_0`.
    pub fn new(base: Policy, horizon: usize) -> Self {
        let n = base.n_states * base.n_actions;
        let current = base.clone();
        Self {
            base,
            horizon,
            t: 0,
            w: vec![0.0; n],
            sum_losses: vec![0.0; n],
            sum_loss_wealth: vec![0.0; n],
            current,
        }
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    /// Policy derived from the current wealth vector.
    pub fn policy(&self) -> &Policy {
        &self.current
    }

    /// Advances one iteration using the advantage table of the current
    /// policy; returns the next policy.
    pub fn step(&mut self, advantage: &QFn) -> Result<Policy, SolverError> {
        self.step_masked(advantage, None)
    }

    /// As [`step`](Self::step), but only updates states flagged in `mask`
    /// (the trajectory-visited subset); other rows keep their wealth.
    pub fn step_masked(
        &mut self,
        advantage: &QFn,
        mask: Option<&[bool]>,
    ) -> Result<Policy, SolverError> {
        if self.t >= self.horizon {
            return Err(SolverError::HorizonExhausted {
                horizon: self.horizon,
            });
        }
        let n = self.base.n_states;
        let na = self.base.n_actions;
        let denom = (self.t + 1) as f64 + self.horizon as f64 / 2.0;
        for s in 0..n {
            if let Some(m) = mask {
                if !m[s] {
                    continue;
                }
            }
            for a in 0..na {
                let idx = s * na + a;
                let adv = advantage.get(s, a);
                let loss = if self.w[idx] > 0.0 { adv } else { adv.max(0.0) };
                self.sum_losses[idx] += loss;
                self.sum_loss_wealth[idx] += loss * self.w[idx];
                self.w[idx] = self.sum_losses[idx] / denom * (1.0 + self.sum_loss_wealth[idx]);
            }
        }
        self.t += 1;
        self.current = derive_policy(&self.base, &self.w);
        Ok(self.current.clone())
    }
}

fn derive_policy(base: &Policy, w: &[f64]) -> Policy {
    let n = base.n_states;
    let na = base.n_actions;
    let mut probs = vec![0.0; n * na];
    for s in 0..n {
        let mut sum = 0.0;
        for a in 0..na {
            let v = base.prob(s, a) * w[s * na + a].max(0.0);
            probs[s * na + a] = v;
            sum += v;
        }
        if sum == 0.0 {
            probs[s * na..(s + 1) * na].copy_from_slice(base.row(s));
        } else {
            for a in 0..na {
                probs[s * na + a] /= sum;
            }
        }
    }
    Policy::from_rows(n, na, probs).expect("derived coin-betting rows are stochastic")
}

/// Sigmoid coin-betting state for the Lagrange multiplier.
#[derive(Debug, Clone)]
pub struct CoinDualState {
    lambda0: f64,
    lambda: f64,
    sum_dev: f64,
    sum_abs_dev: f64,
    wealth: f64,
}

impl CoinDualState {
    pub fn new(lambda0: f64) -> Self {
        Self {
            lambda0,
            lambda: lambda0,
            sum_dev: 0.0,
            sum_abs_dev: 0.0,
            wealth: 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Observes `(lambda_t, est_jc)` and produces `lambda_{t+1}`:
    ///
    /// ```text
    /// beta = (1 - gamma) (2 sigma(2 B / (1/(1-gamma) + C)) - 1)
    /// lambda_{t+1} = clip(lambda_0 - beta (1/(1-gamma) - W), 0, U)
    /// ```
    ///
    /// with `B = sum (est_jc - b)`, `C = sum |est_jc - b|` and
    /// `W = sum (lambda_i - lambda_0)(est_jc(i) - b)` over the observations
    /// so far. The betting fraction stays in `(-(1-gamma), (1-gamma))` and
    /// vanishes at zero cumulative evidence, and the clip keeps the iterate
    /// inside the `[0, U]` interval the analysis requires.
    pub fn step(&mut self, est_jc: f64, b: f64, gamma: f64, u: f64) -> f64 {
        let dev = est_jc - b;
        self.sum_dev += dev;
        self.sum_abs_dev += dev.abs();
        self.wealth += (self.lambda - self.lambda0) * dev;
        let range = 1.0 / (1.0 - gamma);
        let x = 2.0 * self.sum_dev / (range + self.sum_abs_dev);
        let beta = (1.0 - gamma) * (2.0 * sigmoid(x) - 1.0);
        self.lambda = (self.lambda0 - beta * (range - self.wealth)).clamp(0.0, u);
        self.lambda
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Adaptively normalized coin-betting dual (the practical variant).
#[derive(Debug, Clone)]
pub struct PracticalCoinDualState {
    alpha_lambda: f64,
    lambda0: f64,
    lambda: f64,
    scale: f64,
    sum_g: f64,
    sum_abs_g: f64,
    sum_pos_wealth: f64,
}

impl PracticalCoinDualState {
    pub fn new(lambda0: f64, alpha_lambda: f64) -> Result<Self, SolverError> {
        if alpha_lambda <= 0.0 {
            return Err(SolverError::NonPositiveAlphaLambda(alpha_lambda));
        }
        Ok(Self {
            alpha_lambda,
            lambda0,
            lambda: lambda0,
            scale: 0.0,
            sum_g: 0.0,
            sum_abs_g: 0.0,
            sum_pos_wealth: 0.0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// One update with `g_t = b - est_jc`:
    ///
    /// ```text
    /// L_t = max(L_{t-1}, |g_t|)
    /// lambda_{t+1} = lambda_0
    ///   + sum g / (L_t max(sum |g| + L_t, alpha L_t)) * (L_t + sum [(lambda_i - lambda_0) g_i]_+)
    /// ```
    ///
    /// clipped to `[0, U]`; an all-zero gradient history leaves the
    /// multiplier at `lambda_0`.
    pub fn step(&mut self, est_jc: f64, b: f64, u: f64) -> f64 {
        let g = b - est_jc;
        self.scale = self.scale.max(g.abs());
        self.sum_pos_wealth += ((self.lambda - self.lambda0) * g).max(0.0);
        self.sum_g += g;
        self.sum_abs_g += g.abs();
        let quotient = if self.scale == 0.0 {
            0.0
        } else {
            self.sum_g
                / (self.scale * (self.sum_abs_g + self.scale).max(self.alpha_lambda * self.scale))
        };
        self.lambda = (self.lambda0 + quotient * (self.scale + self.sum_pos_wealth)).clamp(0.0, u);
        self.lambda
    }
}
