//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities (run with `--nocapture` to see
//! them). Every tolerance is pinned here, not computed at runtime.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use cmdp::design::build_coreset;
use cmdp::envs::{make_gridworld, make_random_cmdp, RhoSpec};
use cmdp::estimation::{rollout_q_estimates, truncation_horizon, wls_fit};
use cmdp::eval::{exact_eval, policy_signal, policy_transition};
use cmdp::features::FeatureMap;
use cmdp::harness::{oracle_context, run_experiment, run_sweep, ExperimentConfig, OracleContext};
use cmdp::metrics::{compute_og_cv, dual_regret, kl_under_occupancy, primal_regret};
use cmdp::model::{Policy, Signal, TabularCmdp};
use cmdp::oracle::{
    chebyshev_eps_b, default_scan_grid, dual_cap_from_zeta, lambda_star_scan, slater_constant,
    solve_constrained_lp, value_iteration,
};
use cmdp::seeding;
use cmdp::solvers::{run_algorithm, AlgorithmSpec, EstimatorSpec, SolveConfig};

struct Fixture {
    grid: TabularCmdp,
    ctx: OracleContext,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let grid = make_gridworld(0.9, None, &RhoSpec::Uniform).expect("gridworld builds");
        let ctx = oracle_context(&grid).expect("gridworld oracle context");
        Fixture { grid, ctx }
    })
}

fn exact_run(algorithm: AlgorithmSpec, iterations: usize, seed: u64) -> cmdp::metrics::IterateLog {
    let cfg = SolveConfig::new(algorithm, EstimatorSpec::Exact, iterations, seed);
    run_algorithm(&fixture().grid, &cfg).expect("exact run succeeds")
}

fn random_policy(n_states: usize, n_actions: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Policy {
    let mut rows = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let mut row: Vec<f64> = (0..n_actions)
            .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
            .collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
        rows.extend(row);
    }
    Policy::from_rows(n_states, n_actions, rows).expect("random rows are stochastic")
}

/// Criterion 1: with exact action values, the measured OG and CV of CBP and
/// GDA on the gridworld obey the regret decomposition
/// `OG <= [R^p + (1-gamma) R^d(0)] / ((1-gamma) T) + 1e-9` and
/// `CV <= [R^p + (1-gamma) R^d(U)] * 2 / (U (1-gamma) T) + 1e-9`
/// (the CV form uses `lambda* <= U/2`), in under 60 s per run.
#[test]
fn acceptance_01_regret_decomposition_bounds_og_and_cv() {
    let f = fixture();
    let t = 200usize;
    let gamma = f.grid.gamma;

    // the relaxation's precondition: the scan minimizer sits below U/2
    let zeta = slater_constant(&f.grid);
    let u_oracle = dual_cap_from_zeta(zeta, gamma);
    let scan = lambda_star_scan(&f.grid, &default_scan_grid(u_oracle));
    let grid_step = 2.0 * u_oracle / 400.0;
    assert!(
        scan.lambda_hat_star + grid_step <= u_oracle / 2.0,
        "lambda* estimate {} is not below U/2 = {}",
        scan.lambda_hat_star,
        u_oracle / 2.0
    );

    for algorithm in [
        AlgorithmSpec::Cbp,
        AlgorithmSpec::GdaTheory { anytime: false },
    ] {
        let name = algorithm.name();
        let start = Instant::now();
        let log = exact_run(algorithm, t, 0);
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 60.0, "{name}: run took {elapsed:?}");

        let u = log.dual_cap.expect("dual algorithms carry U");
        let (og, cv) =
            compute_og_cv(&log.value_history(), f.ctx.j_r_star, f.grid.threshold).unwrap();
        let rp = primal_regret(&log, &f.ctx.optimal_policy, &f.ctx.nu_star);
        let rd0 = dual_regret(&log.lambdas(), &log.est_values(), 0.0, f.grid.threshold);
        let rdu = dual_regret(&log.lambdas(), &log.est_values(), u, f.grid.threshold);
        let og_bound = (rp + (1.0 - gamma) * rd0) / ((1.0 - gamma) * t as f64);
        let cv_bound = (rp + (1.0 - gamma) * rdu) * 2.0 / (u * (1.0 - gamma) * t as f64);
        assert!(
            og <= og_bound + 1e-9,
            "{name}: OG {og} exceeds bound {og_bound}"
        );
        assert!(
            cv <= cv_bound + 1e-9,
            "{name}: CV {cv} exceeds bound {cv_bound}"
        );
        println!(
            "acceptance 1 ({name}): PASS  og={og:.6} <= {og_bound:.6}, cv={cv:.6} <= {cv_bound:.6}, {elapsed:?}"
        );
    }
}

/// Criterion 2: GDA with the theoretical step sizes keeps its primal regret
/// below `(1+U)/(1-gamma) sqrt(2 log|A|) sqrt(T)` and its dual regret at
/// both ends of `[0, U]` below `U sqrt(T)/(1-gamma)`, strictly, for
/// T in {100, 400}.
#[test]
fn acceptance_02_gda_regret_bounds() {
    let f = fixture();
    let gamma = f.grid.gamma;
    for t in [100usize, 400] {
        let log = exact_run(AlgorithmSpec::GdaTheory { anytime: false }, t, 0);
        let u = log.dual_cap.unwrap();
        let rp = primal_regret(&log, &f.ctx.optimal_policy, &f.ctx.nu_star);
        let rp_bound = (1.0 + u) / (1.0 - gamma)
            * (2.0 * (f.grid.n_actions as f64).ln()).sqrt()
            * (t as f64).sqrt();
        assert!(rp <= rp_bound, "T={t}: primal regret {rp} above {rp_bound}");
        let rd_bound = u * (t as f64).sqrt() / (1.0 - gamma);
        for lambda_ref in [0.0, u] {
            let rd = dual_regret(
                &log.lambdas(),
                &log.est_values(),
                lambda_ref,
                f.grid.threshold,
            );
            assert!(
                rd <= rd_bound,
                "T={t}: dual regret at {lambda_ref} is {rd}, above {rd_bound}"
            );
        }
        println!("acceptance 2 (T={t}): PASS  rp={rp:.3} <= {rp_bound:.3}, rd_bound={rd_bound:.3}");
    }
}

/// Criterion 3: the coin-betting primal regret stays below
/// `3 (1+U)/(1-gamma) sqrt(T (1 + KL(pi_0 || pi*)))` with the KL taken under
/// the comparator occupancy and pi* from the LP. The LP policy is
/// deterministic almost everywhere, so the KL (and the bound) is typically
/// infinite; the measured regret is asserted finite alongside.
#[test]
fn acceptance_03_coin_betting_primal_regret_bound() {
    let f = fixture();
    let gamma = f.grid.gamma;
    let pi0 = Policy::uniform(f.grid.n_states, f.grid.n_actions);
    let kl = kl_under_occupancy(&pi0, &f.ctx.optimal_policy, &f.ctx.nu_star);
    for t in [100usize, 400] {
        let log = exact_run(AlgorithmSpec::Cbp, t, 0);
        let u = log.dual_cap.unwrap();
        let rp = primal_regret(&log, &f.ctx.optimal_policy, &f.ctx.nu_star);
        let bound = 3.0 * (1.0 + u) / (1.0 - gamma) * (t as f64 * (1.0 + kl)).sqrt();
        assert!(rp.is_finite(), "T={t}: primal regret is not finite");
        assert!(rp <= bound, "T={t}: primal regret {rp} above {bound}");
        println!("acceptance 3 (T={t}): PASS  rp={rp:.4} <= bound={bound} (KL={kl})");
    }
}

/// Criterion 4: greedy G-optimal design on the gridworld tile codings with
/// d in {40, 56, 80}: after construction every pair's leverage is at most
/// eps_prime, and the Sherman-Morrison inverse matches a direct dense
/// inverse to 1e-8 Frobenius at every insertion.
#[test]
fn acceptance_04_coreset_correctness() {
    let f = fixture();
    let pairs = f.grid.state_action_pairs();
    for (tile, n_tilings, eps_prime, d) in [
        ((1usize, 3usize), 1usize, 0.75, 40usize),
        ((3, 5), 7, 0.75, 56),
        ((1, 3), 2, 0.8, 80),
    ] {
        let phi = FeatureMap::tile_coding((5, 5), 4, tile, n_tilings, None).unwrap();
        assert_eq!(phi.dim(), d);
        let coreset = build_coreset(&phi, &pairs, eps_prime, 1.0).unwrap();

        let sup = pairs
            .iter()
            .map(|&(s, a)| coreset.leverage(&phi.featurize(s, a)))
            .fold(0.0, f64::max);
        assert!(
            sup <= eps_prime,
            "d={d}: sup leverage {sup} above eps_prime {eps_prime}"
        );

        // replay the deterministic insertion order, comparing the rank-one
        // update against a from-scratch inverse after every insertion
        let mut ginv = DMatrix::<f64>::identity(d, d) / coreset.nu;
        let mut direct = DMatrix::<f64>::identity(d, d) * coreset.nu;
        let mut worst: f64 = 0.0;
        for &(s, a) in &coreset.points {
            let v = DVector::from_vec(phi.featurize(s, a));
            let gv = &ginv * &v;
            ginv -= &gv * gv.transpose() / (1.0 + v.dot(&gv));
            direct += &v * v.transpose();
            let direct_inv = direct
                .clone()
                .try_inverse()
                .expect("ridge keeps this invertible");
            worst = worst.max((&ginv - &direct_inv).norm());
        }
        assert!(worst <= 1e-8, "d={d}: incremental inverse drifted {worst}");
        assert!(
            (&ginv - &coreset.ginv).norm() <= 1e-12,
            "replay disagrees with construction"
        );
        println!(
            "acceptance 4 (d={d}): PASS  |C|={}, sup_leverage={sup:.4} <= {eps_prime}, max_frobenius_gap={worst:.2e}"
        , coreset.len());
    }
}

/// Criterion 5: exact-q weighted least squares through a greedy coreset
/// satisfies the extrapolation bound
/// `|<phi, theta> - Q| <= eps_b (1 + ||phi||_{G_omega^+}) + 1e-9` on every
/// pair of 20 random CMDPs with random d=4 features, in under 30 s total.
#[test]
fn acceptance_05_least_squares_extrapolation_bound() {
    let start = Instant::now();
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let cmdp = make_random_cmdp(6, 3, 0.9, seed);
        let mut rng = seeding::rng(seeding::derive(seed, 0xFEA7, 0));
        let rows: Vec<Vec<f64>> = (0..18)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let phi = FeatureMap::from_table(6, 3, 4, rows).unwrap();
        let coreset = build_coreset(&phi, &cmdp.state_action_pairs(), 0.5, 1.0).unwrap();
        assert!(
            coreset.gram_nonsingular(),
            "seed {seed}: design Gram must reach full rank for the zero-ridge fit"
        );
        let policy = random_policy(6, 3, &mut rng);
        let (_, q) = exact_eval(&cmdp, &policy, Signal::Reward).unwrap();
        let (eps_b, _) = chebyshev_eps_b(&q, &phi).unwrap();
        let targets: Vec<f64> = coreset.points.iter().map(|&(s, a)| q.get(s, a)).collect();
        let theta = wls_fit(&coreset, &targets).unwrap();
        for (s, a) in cmdp.state_action_pairs() {
            let phi_sa = phi.featurize(s, a);
            let pred: f64 = theta.iter().zip(&phi_sa).map(|(t, p)| t * p).sum();
            let err = (pred - q.get(s, a)).abs();
            let bound = eps_b * (1.0 + coreset.fit_leverage(&phi_sa)) + 1e-9;
            assert!(
                err <= bound,
                "seed {seed}, pair ({s},{a}): error {err} above bound {bound} (eps_b {eps_b})"
            );
            worst_gap = worst_gap.max(err - bound);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("acceptance 5: PASS  worst (error - bound) = {worst_gap:.3e}, {elapsed:?}");
}

/// Criterion 6: Hoeffding concentration of the tabular Monte-Carlo
/// estimates. With m = 2000 trajectories per pair and delta = 0.05, the
/// fraction of repetitions in which any pair's deviation exceeds
/// `1/(1-gamma) sqrt(log(2 S A / delta) / (2 m)) + gamma^H/(1-gamma)` is at
/// most 10% over 100 repetitions, per signal.
#[test]
fn acceptance_06_hoeffding_concentration() {
    let f = fixture();
    let policy = Policy::uniform(f.grid.n_states, f.grid.n_actions);
    let pairs = f.grid.state_action_pairs();
    let (_, q_r_exact) = exact_eval(&f.grid, &policy, Signal::Reward).unwrap();
    let (_, q_c_exact) = exact_eval(&f.grid, &policy, Signal::Constraint).unwrap();

    let m = 2000usize;
    let delta = 0.05f64;
    let gamma = f.grid.gamma;
    let horizon = truncation_horizon(gamma, 1e-3);
    let sa = pairs.len() as f64;
    let range = 1.0 / (1.0 - gamma);
    let truncation_bias = gamma.powi(horizon as i32) / (1.0 - gamma);
    let bound = range * ((2.0 * sa / delta).ln() / (2.0 * m as f64)).sqrt() + truncation_bias;

    let reps = 100usize;
    let mut violations_r = 0usize;
    let mut violations_c = 0usize;
    for rep in 0..reps {
        let seed = seeding::derive(0xC0DE, 0, rep as u64);
        let (q_r, q_c) = rollout_q_estimates(&f.grid, &policy, &pairs, m, horizon, seed).unwrap();
        let any_violation = |est: &[f64], exact: &cmdp::model::QFn| {
            pairs
                .iter()
                .enumerate()
                .any(|(i, &(s, a))| (est[i] - exact.get(s, a)).abs() > bound)
        };
        if any_violation(&q_r, &q_r_exact) {
            violations_r += 1;
        }
        if any_violation(&q_c, &q_c_exact) {
            violations_c += 1;
        }
    }
    let freq_r = violations_r as f64 / reps as f64;
    let freq_c = violations_c as f64 / reps as f64;
    assert!(freq_r <= 0.10, "reward-signal violation frequency {freq_r}");
    assert!(
        freq_c <= 0.10,
        "constraint-signal violation frequency {freq_c}"
    );
    println!(
        "acceptance 6: PASS  bound={bound:.4}, violation freq reward={freq_r:.2} constraint={freq_c:.2}"
    );
}

/// Criterion 7: on 20 random feasible CMDPs the dual-scan minimizer respects
/// the strong-duality bound `lambda* <= 1/(zeta (1-gamma))` up to one grid
/// step, with zeta from value iteration on the constraint signal.
#[test]
fn acceptance_07_dual_variable_bound() {
    for seed in 100..120u64 {
        let cmdp = make_random_cmdp(6, 3, 0.9, seed);
        let zeta = slater_constant(&cmdp);
        assert!(
            zeta > 0.0,
            "seed {seed}: construction guarantees feasibility"
        );
        let u = dual_cap_from_zeta(zeta, cmdp.gamma);
        let grid = default_scan_grid(u);
        let grid_step = grid[1] - grid[0];
        let scan = lambda_star_scan(&cmdp, &grid);
        let bound = 1.0 / (zeta * (1.0 - cmdp.gamma));
        assert!(
            scan.lambda_hat_star <= bound + grid_step,
            "seed {seed}: lambda_hat {} above {} + step {}",
            scan.lambda_hat_star,
            bound,
            grid_step
        );
        // the scanned dual function is convex along the grid
        for w in scan.dual_curve.windows(3) {
            let chord = 0.5 * (w[0].1 + w[2].1);
            assert!(w[1].1 <= chord + 1e-7, "seed {seed}: convexity violated");
        }
    }
    println!("acceptance 7: PASS  20/20 random CMDPs satisfy the dual bound");
}

/// Criterion 8: the value-difference identity
/// `V' - V = (I - gamma P')^{-1} [T' V - V]` holds to 1e-8 max norm on 100
/// random (CMDP, pi, pi') triples.
#[test]
fn acceptance_08_value_difference_identity() {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = seeding::rng(seeding::derive(0xD1FF, 1, i));
        let n_states = 2 + (i % 7) as usize; // 2..=8
        let n_actions = 2 + (i % 3) as usize; // 2..=4
        let cmdp = make_random_cmdp(n_states, n_actions, 0.9, 1000 + i);
        let pi = random_policy(n_states, n_actions, &mut rng);
        let pi_prime = random_policy(n_states, n_actions, &mut rng);
        for signal in [Signal::Reward, Signal::Constraint] {
            let (v, _) = exact_eval(&cmdp, &pi, signal).unwrap();
            let (v_prime, _) = exact_eval(&cmdp, &pi_prime, signal).unwrap();
            let p_prime = policy_transition(&cmdp, &pi_prime);
            let r_prime = policy_signal(&cmdp, &pi_prime, signal);
            let v_vec = DVector::from_column_slice(&v.0);
            // T_{pi'} V - V
            let bellman_gap = &r_prime + cmdp.gamma * &p_prime * &v_vec - &v_vec;
            let system = DMatrix::identity(n_states, n_states) - &p_prime * cmdp.gamma;
            let correction = system.lu().solve(&bellman_gap).unwrap();
            let lhs = DVector::from_column_slice(&v_prime.0) - &v_vec;
            worst = worst.max((lhs - correction).amax());
        }
    }
    assert!(worst <= 1e-8, "worst residual {worst}");
    println!("acceptance 8: PASS  worst identity residual = {worst:.3e}");
}

/// Criterion 9: qualitative reproduction of the best-hyperparameter
/// model-based runs (CBP alpha_lambda = 8; GDA alpha_pi = 1.0,
/// alpha_lambda = 0.1; CRPO alpha_pi = 0.75, eta = 0) at T = 500: averaged
/// over 5 seeds, the final-window running OG falls to at most a tenth of its
/// iteration-10 value and the signed running CV ends inside [-0.25, 0.05].
#[test]
fn acceptance_09_best_hyperparameter_convergence() {
    let f = fixture();
    let t = 500usize;
    let window = t / 10;
    for algorithm in [
        AlgorithmSpec::CbpPractical { alpha_lambda: 8.0 },
        AlgorithmSpec::Gda {
            alpha_pi: 1.0,
            alpha_lambda: 0.1,
        },
        AlgorithmSpec::Crpo {
            alpha_pi: 0.75,
            eta_tol: 0.0,
        },
    ] {
        let name = algorithm.name();
        let mut og10 = Vec::new();
        let mut og_final = Vec::new();
        let mut cv_final = Vec::new();
        for seed in 0..5u64 {
            let log = exact_run(algorithm.clone(), t, seed);
            let gaps: Vec<f64> = log.records.iter().map(|r| f.ctx.j_r_star - r.j_r).collect();
            let running =
                |upto: usize| -> f64 { gaps[..=upto].iter().sum::<f64>() / (upto + 1) as f64 };
            og10.push(running(10));
            og_final.push((t - window..t).map(&running).sum::<f64>() / window as f64);
            let violations: f64 = log.records.iter().map(|r| f.grid.threshold - r.j_c).sum();
            cv_final.push(violations / t as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m10, m_final, m_cv) = (mean(&og10), mean(&og_final), mean(&cv_final));
        assert!(
            m_final <= 0.1 * m10,
            "{name}: final-window OG {m_final} above 0.1 x iteration-10 OG {m10}"
        );
        assert!(
            (-0.25..=0.05).contains(&m_cv),
            "{name}: final running CV {m_cv} outside [-0.25, 0.05]"
        );
        println!(
            "acceptance 9 ({name}): PASS  og10={m10:.4}, final_window={m_final:.4} (ratio {:.3}), cv={m_cv:.4}",
            m_final / m10
        );
    }
}

/// Criterion 10: oracle cross-checks. With b = 0 the constrained LP matches
/// reward-only value iteration to 1e-6; whenever the scanned dual minimizer
/// exceeds one grid step the LP's constraint row binds to 1e-6.
#[test]
fn acceptance_10_oracle_cross_checks() {
    // inactive constraint: LP equals value iteration
    let mut free = fixture().grid.clone();
    free.threshold = 0.0;
    let lp_free = solve_constrained_lp(&free).unwrap();
    let vi = value_iteration(&free, 1.0, 0.0);
    assert!(
        (lp_free.j_r_star - vi.scalar).abs() <= 1e-6,
        "LP {} vs VI {}",
        lp_free.j_r_star,
        vi.scalar
    );
    for seed in 300..305u64 {
        let mut cmdp = make_random_cmdp(5, 3, 0.9, seed);
        cmdp.threshold = 0.0;
        let lp = solve_constrained_lp(&cmdp).unwrap();
        let vi = value_iteration(&cmdp, 1.0, 0.0);
        assert!((lp.j_r_star - vi.scalar).abs() <= 1e-6, "seed {seed}");
    }

    // active constraint: positive multiplier means a binding row
    let f = fixture();
    let zeta = slater_constant(&f.grid);
    let u = dual_cap_from_zeta(zeta, f.grid.gamma);
    let grid = default_scan_grid(u);
    let grid_step = grid[1] - grid[0];
    let scan = lambda_star_scan(&f.grid, &grid);
    assert!(
        scan.lambda_hat_star > grid_step,
        "gridworld multiplier should be active"
    );
    let lp = solve_constrained_lp(&f.grid).unwrap();
    let slack = (lp.j_c_star - f.grid.threshold).abs();
    assert!(slack <= 1e-6, "constraint row slack {slack}");
    println!(
        "acceptance 10: PASS  |LP - VI| checks passed, binding slack = {slack:.2e}, lambda_hat = {:.4}",
        scan.lambda_hat_star
    );
}

/// Criterion 11: two `solve` invocations with the same config and seed
/// produce byte-identical CSV files.
#[test]
fn acceptance_11_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"env": {{"kind": "gridworld"}},
            "algorithm": {{"name": "cbp_practical", "alpha_lambda": 8.0}},
            "estimator": {{"kind": "monte_carlo", "m": 3, "eps_trunc": 0.01}},
            "dual_cap": {{"source": "estimated", "pre_iterations": 5}},
            "T": 8, "seeds": [42], "output": "{}"}}"#,
        dir.path().display()
    );
    let config = ExperimentConfig::from_json(&text).unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    run_experiment(&config, 42, Some(&out_a)).unwrap();
    run_experiment(&config, 42, Some(&out_b)).unwrap();
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "CSV bytes differ between identical runs");
    println!("acceptance 11: PASS  {} identical bytes", a.len());
}

/// Criterion 12: robustness ordering. Over the tabular hyperparameter grids
/// the spread (max - min) of the mean final OG across cells is strictly
/// smaller for practical CBP than for GDA on the model-based gridworld
/// (5 seeds, T = 500).
#[test]
fn acceptance_12_hyperparameter_robustness_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let spread = |name: &str, algo: &str| -> f64 {
        let text = format!(
            r#"{{"env": {{"kind": "gridworld"}}, "algorithm": {algo},
                "T": 500, "seeds": [0, 1, 2, 3, 4], "output": "{}/{name}"}}"#,
            dir.path().display()
        );
        let config = ExperimentConfig::from_json(&text).unwrap();
        let sweep = run_sweep(&config, None).unwrap();
        let ogs: Vec<f64> = sweep
            .cells
            .iter()
            .map(|c| {
                assert!(
                    matches!(c.status, cmdp::harness::CellStatus::Ok),
                    "{name} cell {} failed",
                    c.label
                );
                c.mean_og
            })
            .collect();
        ogs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ogs.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let cbp = spread(
        "cbp",
        r#"{"name": "cbp_practical", "alpha_lambda": [1, 2, 5, 8, 15, 50, 100, 300, 500]}"#,
    );
    let gda = spread(
        "gda",
        r#"{"name": "gda", "alpha_pi": [0.001, 0.01, 0.1, 1.0],
            "alpha_lambda": [0.0001, 0.001, 0.01, 0.1, 1.0]}"#,
    );
    let crpo = spread(
        "crpo",
        r#"{"name": "crpo", "alpha_pi": [0.001, 0.01, 0.05, 0.1, 0.5, 0.75]}"#,
    );
    assert!(
        cbp < gda,
        "CBP spread {cbp} not smaller than GDA spread {gda}"
    );
    println!("acceptance 12: PASS  spreads: cbp={cbp:.4} < gda={gda:.4} (crpo={crpo:.4})");
}
