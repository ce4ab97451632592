//! The iteration driver shared by every algorithm variant, plus the
//! feasibility pre-phase that estimates the Slater margin and the dual cap.

use std::time::Instant;

use rand::Rng;

use crate::design::{build_coreset, coreset_from_points, Coreset};
use crate::envs::{sample_rollout, Sampler};
use crate::estimation::{
    estimate_constraint_value, exact_estimator, extrapolate_tables, rollout_q_estimates,
    truncation_horizon, wls_fit, EstimateMeta, QEstimate,
};
use crate::eval::scalar_value;
use crate::features::FeatureMap;
use crate::metrics::{IterateLog, IterateRecord};
use crate::model::{Policy, QFn, Signal, TabularCmdp};
use crate::oracle::{dual_cap_from_zeta, slater_constant};
use crate::seeding;
use crate::solvers::coin::{CoinDualState, PracticalCoinDualState, PrimalCoinState};
use crate::solvers::crpo::crpo_step;
use crate::solvers::mirror::{
    entropy_regularized_q, gda_anytime_stepsizes, gda_theory_stepsizes, mirror_ascent_step,
    normalized_advantage_table, projected_gd_dual_step,
};
use crate::solvers::SolverError;

// seed streams, one per consumer of randomness
const STREAM_ESTIMATE: u64 = 1;
const STREAM_FEASIBILITY: u64 = 2;
const STREAM_VISITED_MASK: u64 = 3;

/// Algorithm selector with its tuned hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    /// Coin-betting primal and sigmoid coin-betting dual.
    Cbp,
    /// Coin-betting primal with the adaptively normalized dual.
    CbpPractical { alpha_lambda: f64 },
    /// Mirror ascent and projected gradient descent at fixed step sizes.
    Gda { alpha_pi: f64, alpha_lambda: f64 },
    /// GDA at the theoretical step sizes (fixed-horizon form by default).
    GdaTheory { anytime: bool },
    /// Primal-only baseline switching between reward and constraint ascent.
    Crpo { alpha_pi: f64, eta_tol: f64 },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Cbp => "cbp",
            AlgorithmSpec::CbpPractical { .. } => "cbp_practical",
            AlgorithmSpec::Gda { .. } => "gda",
            AlgorithmSpec::GdaTheory { .. } => "gda_theory",
            AlgorithmSpec::Crpo { .. } => "crpo",
        }
    }

    fn uses_dual(&self) -> bool {
        !matches!(self, AlgorithmSpec::Crpo { .. })
    }
}

/// Action-value estimation route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    /// True tables from the model; zero estimation error.
    Exact,
    /// Monte-Carlo rollouts on the design points, fitted through features.
    MonteCarlo {
        m: usize,
        eps_trunc: f64,
        delta: f64,
    },
}

/// How the design points for the sampled estimator are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoresetSpec {
    /// Every state-action pair, uniformly weighted.
    FullEnumeration,
    /// Greedy G-optimal design at tolerance `eps_prime` and ridge `nu`.
    Greedy { eps_prime: f64, nu: f64 },
}

/// Source of the dual projection cap `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualCapSpec {
    /// Feasibility pre-phase: maximize the constraint value with the
    /// coin-betting primal and set `U = 2 / (zeta_hat (1 - gamma))`.
    Estimated {
        pre_iterations: usize,
    },
    /// Exact `zeta` from value iteration on the constraint signal.
    Oracle,
    Fixed(f64),
}

/// Full specification of one solver run.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub algorithm: AlgorithmSpec,
    pub estimator: EstimatorSpec,
    /// Feature map for the sampled estimator; `None` means one-hot.
    pub features: Option<FeatureMap>,
    pub coreset: CoresetSpec,
    pub iterations: usize,
    pub seed: u64,
    pub entropy_nu: f64,
    pub dual_cap: DualCapSpec,
    /// Restrict primal updates to states visited by a fresh trajectory.
    pub visited_only: bool,
    pub lambda0: f64,
}

impl SolveConfig {
    pub fn new(
        algorithm: AlgorithmSpec,
        estimator: EstimatorSpec,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            algorithm,
            estimator,
            features: None,
            coreset: CoresetSpec::FullEnumeration,
            iterations,
            seed,
            entropy_nu: 0.0,
            dual_cap: DualCapSpec::Estimated {
                pre_iterations: 100,
            },
            visited_only: false,
            lambda0: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidHyperparameter(msg));
        match &self.algorithm {
            AlgorithmSpec::Gda {
                alpha_pi,
                alpha_lambda,
            } => {
                if *alpha_pi < 0.0 || *alpha_lambda < 0.0 {
                    return bad(format!(
                        "gda step sizes must be nonnegative, got ({alpha_pi}, {alpha_lambda})"
                    ));
                }
            }
            AlgorithmSpec::CbpPractical { alpha_lambda } => {
                if *alpha_lambda <= 0.0 {
                    return Err(SolverError::NonPositiveAlphaLambda(*alpha_lambda));
                }
            }
            AlgorithmSpec::Crpo { alpha_pi, eta_tol } => {
                if *alpha_pi < 0.0 || *eta_tol < 0.0 {
                    return bad(format!(
                        "crpo parameters must be nonnegative, got ({alpha_pi}, {eta_tol})"
                    ));
                }
            }
            AlgorithmSpec::Cbp | AlgorithmSpec::GdaTheory { .. } => {}
        }
        if let EstimatorSpec::MonteCarlo {
            m,
            eps_trunc,
            delta,
        } = self.estimator
        {
            if m == 0 {
                return bad("monte_carlo estimator needs m >= 1".into());
            }
            if eps_trunc <= 0.0 || !(0.0..1.0).contains(&delta) {
                return bad(format!(
                    "invalid (eps_trunc, delta) = ({eps_trunc}, {delta})"
                ));
            }
        }
        if let CoresetSpec::Greedy { eps_prime, nu } = self.coreset {
            if eps_prime <= 0.0 || nu <= 0.0 {
                return bad(format!("invalid coreset parameters ({eps_prime}, {nu})"));
            }
        }
        if let DualCapSpec::Fixed(u) = self.dual_cap {
            if u <= 0.0 {
                return bad(format!("fixed dual cap must be positive, got {u}"));
            }
        }
        if self.entropy_nu < 0.0 {
            return bad(format!(
                "entropy coefficient must be nonnegative, got {}",
                self.entropy_nu
            ));
        }
        if self.lambda0 < 0.0 {
            return bad(format!("lambda0 must be nonnegative, got {}", self.lambda0));
        }
        Ok(())
    }
}

/// Estimation machinery resolved from a config: feature map, design points
/// and rollout shape.
struct EstimatorRig<'a> {
    cmdp: &'a TabularCmdp,
    spec: EstimatorSpec,
    features: FeatureMap,
    coreset: Option<Coreset>,
    horizon: usize,
}

impl<'a> EstimatorRig<'a> {
    fn build(
        cmdp: &'a TabularCmdp,
        spec: EstimatorSpec,
        features: Option<FeatureMap>,
        coreset_spec: CoresetSpec,
    ) -> Result<Self, SolverError> {
        let features =
            features.unwrap_or_else(|| FeatureMap::one_hot(cmdp.n_states, cmdp.n_actions));
        let (coreset, horizon) = match spec {
            EstimatorSpec::Exact => (None, truncation_horizon(cmdp.gamma, 1e-3)),
            EstimatorSpec::MonteCarlo { eps_trunc, .. } => {
                let pairs = cmdp.state_action_pairs();
                let coreset = match coreset_spec {
                    CoresetSpec::FullEnumeration => coreset_from_points(&features, &pairs, 1.0)?,
                    CoresetSpec::Greedy { eps_prime, nu } => {
                        build_coreset(&features, &pairs, eps_prime, nu)?
                    }
                };
                (Some(coreset), truncation_horizon(cmdp.gamma, eps_trunc))
            }
        };
        Ok(Self {
            cmdp,
            spec,
            features,
            coreset,
            horizon,
        })
    }

    fn estimate(&self, policy: &Policy, seed: u64) -> Result<(QFn, QFn), SolverError> {
        match self.spec {
            EstimatorSpec::Exact => Ok(exact_estimator(self.cmdp, policy)?),
            EstimatorSpec::MonteCarlo { m, delta, .. } => {
                let coreset = self
                    .coreset
                    .as_ref()
                    .expect("sampled rig always has a coreset");
                let (q_r, q_c) =
                    rollout_q_estimates(self.cmdp, policy, &coreset.points, m, self.horizon, seed)?;
                let estimate = QEstimate {
                    theta_r: wls_fit(coreset, &q_r)?,
                    theta_c: wls_fit(coreset, &q_c)?,
                    features: self.features.clone(),
                    meta: EstimateMeta {
                        m,
                        horizon: self.horizon,
                        seed,
                        delta,
                    },
                };
                Ok(extrapolate_tables(
                    &estimate,
                    self.cmdp.n_states,
                    self.cmdp.n_actions,
                ))
            }
        }
    }
}

/// Outcome of the feasibility pre-phase.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub zeta_hat: f64,
    pub dual_cap: f64,
    /// The constraint-maximizing policy found by the pre-phase.
    pub policy: Policy,
}

#[derive(Debug, Clone)]
pub enum FeasibilityOutcome {
    Feasible(Feasibility),
    /// The estimated constraint value hits `b` exactly; the pre-phase policy
    /// itself is returned as the solution.
    Boundary {
        policy: Policy,
    },
}

/// Maximizes the estimated constraint value with the coin-betting primal
/// (advantages normalized by `1 - gamma`, the dual-free case), then declares
/// the problem feasible or infeasible from `zeta_hat = est_jc(pi~) - b`.
pub fn estimate_feasibility_and_u(
    cmdp: &TabularCmdp,
    pre_iterations: usize,
    estimator: EstimatorSpec,
    features: Option<FeatureMap>,
    coreset: CoresetSpec,
    seed: u64,
) -> Result<FeasibilityOutcome, SolverError> {
    let rig = EstimatorRig::build(cmdp, estimator, features, coreset)?;
    feasibility_with_rig(&rig, pre_iterations, seed)
}

fn feasibility_with_rig(
    rig: &EstimatorRig,
    pre_iterations: usize,
    seed: u64,
) -> Result<FeasibilityOutcome, SolverError> {
    let cmdp = rig.cmdp;
    let uniform = Policy::uniform(cmdp.n_states, cmdp.n_actions);
    let mut primal = PrimalCoinState::new(uniform, pre_iterations);
    for t in 0..pre_iterations {
        let policy = primal.policy().clone();
        let (_, q_c) =
            rig.estimate(&policy, seeding::derive(seed, STREAM_FEASIBILITY, t as u64))?;
        let advantage = normalized_advantage_table(&q_c, &policy, 0.0, cmdp.gamma);
        primal.step(&advantage)?;
    }
    let policy = primal.policy().clone();
    let (_, q_c) = rig.estimate(
        &policy,
        seeding::derive(seed, STREAM_FEASIBILITY, pre_iterations as u64),
    )?;
    let est_jc = estimate_constraint_value(&cmdp.rho, &policy, &q_c);
    let zeta_hat = est_jc - cmdp.threshold;
    if zeta_hat < 0.0 {
        Err(SolverError::Infeasible { zeta_hat })
    } else if zeta_hat == 0.0 {
        Ok(FeasibilityOutcome::Boundary { policy })
    } else {
        Ok(FeasibilityOutcome::Feasible(Feasibility {
            zeta_hat,
            dual_cap: dual_cap_from_zeta(zeta_hat, cmdp.gamma),
            policy,
        }))
    }
}

enum DualState {
    Projected {
        lambda: f64,
        eta2: f64,
        anytime: bool,
    },
    Coin(CoinDualState),
    PracticalCoin(PracticalCoinDualState),
    None,
}

impl DualState {
    fn lambda(&self) -> f64 {
        match self {
            DualState::Projected { lambda, .. } => *lambda,
            DualState::Coin(s) => s.lambda(),
            DualState::PracticalCoin(s) => s.lambda(),
            DualState::None => 0.0,
        }
    }

    fn step(&mut self, t: usize, est_jc: f64, cmdp: &TabularCmdp, u: f64, n_actions: usize) {
        match self {
            DualState::Projected {
                lambda,
                eta2,
                anytime,
            } => {
                let step = if *anytime {
                    gda_anytime_stepsizes(t + 1, n_actions, cmdp.gamma, u).1
                } else {
                    *eta2
                };
                *lambda = projected_gd_dual_step(*lambda, est_jc, cmdp.threshold, step, u);
            }
            DualState::Coin(s) => {
                s.step(est_jc, cmdp.threshold, cmdp.gamma, u);
            }
            DualState::PracticalCoin(s) => {
                s.step(est_jc, cmdp.threshold, u);
            }
            DualState::None => {}
        }
    }
}

enum PrimalState {
    Mirror {
        policy: Policy,
        eta1: f64,
        anytime: bool,
    },
    Coin(PrimalCoinState),
    Crpo {
        policy: Policy,
        alpha_pi: f64,
        eta_tol: f64,
    },
}

/// Runs the configured algorithm for `config.iterations` iterations and logs
/// one record per iteration. Deterministic given `(config, seed)`.
pub fn run_algorithm(cmdp: &TabularCmdp, config: &SolveConfig) -> Result<IterateLog, SolverError> {
    config.validate()?;
    let start = Instant::now();
    let rig = EstimatorRig::build(
        cmdp,
        config.estimator,
        config.features.clone(),
        config.coreset,
    )?;

    let mut zeta_hat = None;
    let mut dual_cap = None;
    let mut boundary_policy = None;
    if config.algorithm.uses_dual() {
        match config.dual_cap {
            DualCapSpec::Estimated { pre_iterations } => {
                match feasibility_with_rig(&rig, pre_iterations, config.seed)? {
                    FeasibilityOutcome::Feasible(f) => {
                        zeta_hat = Some(f.zeta_hat);
                        dual_cap = Some(f.dual_cap);
                    }
                    FeasibilityOutcome::Boundary { policy } => {
                        boundary_policy = Some(policy);
                    }
                }
            }
            DualCapSpec::Oracle => {
                let zeta = slater_constant(cmdp);
                if zeta <= 0.0 {
                    return Err(SolverError::Infeasible { zeta_hat: zeta });
                }
                zeta_hat = Some(zeta);
                dual_cap = Some(dual_cap_from_zeta(zeta, cmdp.gamma));
            }
            DualCapSpec::Fixed(u) => {
                dual_cap = Some(u);
            }
        }
    }

    // boundary case: the pre-phase policy is already the solution, so the
    // log holds it unchanged
    if let Some(policy) = boundary_policy {
        let mut records = Vec::with_capacity(config.iterations);
        let (q_r, q_c) = rig.estimate(&policy, seeding::derive(config.seed, STREAM_ESTIMATE, 0))?;
        let est_jc = estimate_constraint_value(&cmdp.rho, &policy, &q_c);
        let j_r = scalar_value(cmdp, &policy, Signal::Reward)?;
        let j_c = scalar_value(cmdp, &policy, Signal::Constraint)?;
        for _ in 0..config.iterations {
            records.push(IterateRecord {
                j_r,
                j_c,
                est_jc,
                lambda: config.lambda0,
                q_hat_r: q_r.clone(),
                q_hat_c: q_c.clone(),
                policy: policy.clone(),
            });
        }
        return Ok(IterateLog {
            records,
            seed: config.seed,
            dual_cap,
            zeta_hat: Some(0.0),
            wall: start.elapsed(),
        });
    }

    let u = dual_cap.unwrap_or(0.0);
    let n = cmdp.n_states;
    let na = cmdp.n_actions;
    let uniform = Policy::uniform(n, na);
    let lambda0 = config.lambda0.min(u);

    let mut primal = match &config.algorithm {
        AlgorithmSpec::Cbp | AlgorithmSpec::CbpPractical { .. } => {
            PrimalState::Coin(PrimalCoinState::new(uniform, config.iterations))
        }
        AlgorithmSpec::Gda { alpha_pi, .. } => PrimalState::Mirror {
            policy: uniform,
            eta1: *alpha_pi,
            anytime: false,
        },
        AlgorithmSpec::GdaTheory { anytime } => {
            let (eta1, _) = gda_theory_stepsizes(config.iterations, na, cmdp.gamma, u);
            PrimalState::Mirror {
                policy: uniform,
                eta1,
                anytime: *anytime,
            }
        }
        AlgorithmSpec::Crpo { alpha_pi, eta_tol } => PrimalState::Crpo {
            policy: uniform,
            alpha_pi: *alpha_pi,
            eta_tol: *eta_tol,
        },
    };
    let mut dual = match &config.algorithm {
        AlgorithmSpec::Cbp => DualState::Coin(CoinDualState::new(lambda0)),
        AlgorithmSpec::CbpPractical { alpha_lambda } => {
            DualState::PracticalCoin(PracticalCoinDualState::new(lambda0, *alpha_lambda)?)
        }
        AlgorithmSpec::Gda { alpha_lambda, .. } => DualState::Projected {
            lambda: lambda0,
            eta2: *alpha_lambda,
            anytime: false,
        },
        AlgorithmSpec::GdaTheory { anytime } => {
            let (_, eta2) = gda_theory_stepsizes(config.iterations, na, cmdp.gamma, u);
            DualState::Projected {
                lambda: lambda0,
                eta2,
                anytime: *anytime,
            }
        }
        AlgorithmSpec::Crpo { .. } => DualState::None,
    };

    let sampler = if config.visited_only {
        Some(Sampler::new(cmdp))
    } else {
        None
    };
    let mut records = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let policy = match &primal {
            PrimalState::Mirror { policy, .. } | PrimalState::Crpo { policy, .. } => policy.clone(),
            PrimalState::Coin(state) => state.policy().clone(),
        };
        let lambda = dual.lambda();
        debug_assert!(
            !config.algorithm.uses_dual() || (0.0..=u + 1e-12).contains(&lambda),
            "dual iterate {lambda} escaped [0, {u}]"
        );

        let (q_r, q_c) = rig.estimate(
            &policy,
            seeding::derive(config.seed, STREAM_ESTIMATE, t as u64),
        )?;
        let est_jc = estimate_constraint_value(&cmdp.rho, &policy, &q_c);
        let j_r = scalar_value(cmdp, &policy, Signal::Reward)?;
        let j_c = scalar_value(cmdp, &policy, Signal::Constraint)?;
        records.push(IterateRecord {
            j_r,
            j_c,
            est_jc,
            lambda,
            q_hat_r: q_r.clone(),
            q_hat_c: q_c.clone(),
            policy: policy.clone(),
        });

        let mask = sampler.as_ref().map(|sampler| {
            let mut rng = seeding::rng(seeding::derive(config.seed, STREAM_VISITED_MASK, t as u64));
            let mut mask = vec![false; n];
            let s0 = sample_from(&cmdp.rho, &mut rng);
            let a0 = sample_from(policy.row(s0), &mut rng);
            let rollout = sample_rollout(sampler, &policy, (s0, a0), rig.horizon, &mut rng);
            for s in rollout.visited {
                mask[s] = true;
            }
            mask
        });

        match &mut primal {
            PrimalState::Mirror {
                policy: pi,
                eta1,
                anytime,
            } => {
                let q_l = entropy_regularized_q(&q_r, &q_c, lambda, config.entropy_nu, pi);
                let step = if *anytime {
                    gda_anytime_stepsizes(t + 1, na, cmdp.gamma, u).0
                } else {
                    *eta1
                };
                *pi = match &mask {
                    None => mirror_ascent_step(pi, &q_l, step)?,
                    Some(m) => masked_mirror_step(pi, &q_l, step, m)?,
                };
            }
            PrimalState::Coin(state) => {
                let q_l = entropy_regularized_q(&q_r, &q_c, lambda, config.entropy_nu, &policy);
                let advantage = normalized_advantage_table(&q_l, &policy, u, cmdp.gamma);
                state.step_masked(&advantage, mask.as_deref())?;
            }
            PrimalState::Crpo {
                policy: pi,
                alpha_pi,
                eta_tol,
            } => {
                let zero = QFn::zeros(n, na);
                let q_r_eff = entropy_regularized_q(&q_r, &zero, 0.0, config.entropy_nu, pi);
                let q_c_eff = entropy_regularized_q(&q_c, &zero, 0.0, config.entropy_nu, pi);
                let stepped = crpo_step(
                    pi,
                    &q_r_eff,
                    &q_c_eff,
                    est_jc,
                    cmdp.threshold,
                    *eta_tol,
                    *alpha_pi,
                )?;
                *pi = match &mask {
                    None => stepped,
                    Some(m) => merge_masked(pi, &stepped, m)?,
                };
            }
        }
        dual.step(t, est_jc, cmdp, u, na);
    }

    Ok(IterateLog {
        records,
        seed: config.seed,
        dual_cap,
        zeta_hat,
        wall: start.elapsed(),
    })
}

/// Mirror step applied only at masked states.
fn masked_mirror_step(
    pi: &Policy,
    q_l: &QFn,
    eta: f64,
    mask: &[bool],
) -> Result<Policy, SolverError> {
    let stepped = mirror_ascent_step(pi, q_l, eta)?;
    merge_masked(pi, &stepped, mask)
}

fn merge_masked(old: &Policy, new: &Policy, mask: &[bool]) -> Result<Policy, SolverError> {
    let mut probs = Vec::with_capacity(old.n_states * old.n_actions);
    for (s, &visited) in mask.iter().enumerate() {
        let src = if visited { new.row(s) } else { old.row(s) };
        probs.extend_from_slice(src);
    }
    Ok(Policy::from_rows(old.n_states, old.n_actions, probs)?)
}

fn sample_from(probs: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
