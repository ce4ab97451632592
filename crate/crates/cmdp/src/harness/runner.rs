//! Single-run execution: oracle context, metric columns, CSV rendering.

use std::path::{Path, PathBuf};

use crate::design::{build_coreset, coreset_from_points, Coreset};
use crate::estimation::exact_estimator;
use crate::eval::discounted_occupancy;
use crate::harness::{CoresetConfig, ExperimentConfig, HarnessError};
use crate::metrics::{primal_regret_step, IterateLog};
use crate::model::{OccupancyMeasure, Policy, TabularCmdp};
use crate::oracle::{
    chebyshev_eps_b, default_scan_grid, dual_cap_from_zeta, lambda_star_scan, slater_constant,
    solve_constrained_lp,
};
use crate::solvers::{run_algorithm, AlgorithmSpec};

/// Ground truth shared by every run on one environment: the LP optimum and
/// the comparator occupancy the regret columns weight states with.
#[derive(Debug, Clone)]
pub struct OracleContext {
    pub j_r_star: f64,
    pub j_c_star: f64,
    pub zeta: f64,
    pub optimal_policy: Policy,
    pub nu_star: OccupancyMeasure,
}

pub fn oracle_context(cmdp: &TabularCmdp) -> Result<OracleContext, HarnessError> {
    let lp = solve_constrained_lp(cmdp)?;
    let nu_star = discounted_occupancy(cmdp, &lp.optimal_policy)?;
    Ok(OracleContext {
        j_r_star: lp.j_r_star,
        j_c_star: lp.j_c_star,
        zeta: slater_constant(cmdp),
        optimal_policy: lp.optimal_policy,
        nu_star,
    })
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub log: IterateLog,
    pub csv: String,
    /// Running average optimality gap at the final iteration.
    pub final_og: f64,
    /// Signed running average of `b - J_c` at the final iteration.
    pub final_cv: f64,
}

/// Renders the per-iteration CSV.
///
/// Columns: `iter, J_r, J_c, est_Jc, lambda, og_running, cv_running,
/// primal_regret_running, dual_regret_at_0, dual_regret_at_U`. `og_running`
/// is the running average optimality gap; `cv_running` is the signed running
/// average of `b - J_c` (its positive part is the reported CV), which is
/// what the best-cell rule `CV in [-0.25, 0]` reads. The header line carries
/// the config hash, cell, seed, threshold, `U`, `zeta_hat` and step sizes.
pub fn render_csv(
    cmdp: &TabularCmdp,
    ctx: &OracleContext,
    log: &IterateLog,
    config_hash: &str,
    cell: &str,
    algorithm: &AlgorithmSpec,
) -> String {
    let u = log.dual_cap;
    let (eta1, eta2) = match algorithm {
        AlgorithmSpec::Gda {
            alpha_pi,
            alpha_lambda,
        } => (Some(*alpha_pi), Some(*alpha_lambda)),
        AlgorithmSpec::GdaTheory { .. } => {
            let u = u.unwrap_or(f64::NAN);
            let (e1, e2) = crate::solvers::mirror::gda_theory_stepsizes(
                log.len().max(1),
                cmdp.n_actions,
                cmdp.gamma,
                u,
            );
            (Some(e1), Some(e2))
        }
        AlgorithmSpec::Crpo { alpha_pi, .. } => (Some(*alpha_pi), None),
        _ => (None, None),
    };
    let alpha_lambda = match algorithm {
        AlgorithmSpec::CbpPractical { alpha_lambda } => Some(*alpha_lambda),
        _ => None,
    };
    let fmt_opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v}"));

    let mut out = String::new();
    out.push_str(&format!(
        "# config={config_hash} cell={cell} algo={} seed={} T={} b={} j_r_star={} u={} zeta_hat={} eta1={} eta2={} alpha_lambda={}\n",
        algorithm.name(),
        log.seed,
        log.len(),
        cmdp.threshold,
        ctx.j_r_star,
        fmt_opt(u),
        fmt_opt(log.zeta_hat),
        fmt_opt(eta1),
        fmt_opt(eta2),
        fmt_opt(alpha_lambda),
    ));
    out.push_str(
        "iter,J_r,J_c,est_Jc,lambda,og_running,cv_running,primal_regret_running,dual_regret_at_0,dual_regret_at_U\n",
    );

    let mut gap_sum = 0.0;
    let mut violation_sum = 0.0;
    let mut primal_sum = 0.0;
    let mut dual0_sum = 0.0;
    let mut dual_u_sum = 0.0;
    for (t, rec) in log.records.iter().enumerate() {
        gap_sum += ctx.j_r_star - rec.j_r;
        violation_sum += cmdp.threshold - rec.j_c;
        primal_sum += primal_regret_step(
            &rec.policy,
            &log.lagrangian_q(t),
            &ctx.optimal_policy,
            &ctx.nu_star,
        );
        let dev = rec.est_jc - cmdp.threshold;
        dual0_sum += rec.lambda * dev;
        dual_u_sum += (rec.lambda - u.unwrap_or(rec.lambda)) * dev;
        let count = (t + 1) as f64;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t,
            rec.j_r,
            rec.j_c,
            rec.est_jc,
            rec.lambda,
            gap_sum / count,
            violation_sum / count,
            primal_sum,
            dual0_sum,
            dual_u_sum,
        ));
    }
    out
}

/// Runs one fully resolved cell and renders its CSV.
pub fn run_cell(
    cmdp: &TabularCmdp,
    ctx: &OracleContext,
    config: &ExperimentConfig,
    algorithm: AlgorithmSpec,
    cell: &str,
    seed: u64,
) -> Result<RunArtifacts, HarnessError> {
    let solve = config.solve_config(cmdp, algorithm.clone(), seed)?;
    let log = run_algorithm(cmdp, &solve)?;
    let csv = render_csv(cmdp, ctx, &log, &config.hash(), cell, &algorithm);
    let (final_og, final_cv) = match log.len() {
        0 => (f64::NAN, f64::NAN),
        t => {
            let gap: f64 = log.records.iter().map(|r| ctx.j_r_star - r.j_r).sum();
            let violation: f64 = log.records.iter().map(|r| cmdp.threshold - r.j_c).sum();
            (gap / t as f64, violation / t as f64)
        }
    };
    Ok(RunArtifacts {
        log,
        csv,
        final_og,
        final_cv,
    })
}

/// `solve` entry point: builds the environment, runs the configured
/// algorithm once and writes the CSV to `out_path` (default
/// `<output>/solve_seed<seed>.csv`).
pub fn run_experiment(
    config: &ExperimentConfig,
    seed: u64,
    out_path: Option<&Path>,
) -> Result<(RunArtifacts, PathBuf), HarnessError> {
    let cmdp = config.env.build()?;
    let ctx = oracle_context(&cmdp)?;
    let algorithm = config.algorithm.single()?;
    let artifacts = run_cell(&cmdp, &ctx, config, algorithm, "single", seed)?;
    let path = match out_path {
        Some(p) => p.to_path_buf(),
        None => Path::new(&config.output).join(format!("solve_seed{seed}.csv")),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(&path, &artifacts.csv).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((artifacts, path))
}

/// `oracle` subcommand payload: LP optimum, Slater margin, dual-scan
/// minimizer and the best-linear-fit error of the optimal policy's action
/// values under the configured features.
pub fn oracle_report(config: &ExperimentConfig) -> Result<serde_json::Value, HarnessError> {
    let cmdp = config.env.build()?;
    let lp = solve_constrained_lp(&cmdp)?;
    let zeta = slater_constant(&cmdp);
    let scan = if zeta > 0.0 {
        let u = dual_cap_from_zeta(zeta, cmdp.gamma);
        Some(lambda_star_scan(&cmdp, &default_scan_grid(u)))
    } else {
        None
    };
    let features = config
        .features
        .build(&cmdp)?
        .unwrap_or_else(|| crate::features::FeatureMap::one_hot(cmdp.n_states, cmdp.n_actions));
    let (q_r, q_c) = exact_estimator(&cmdp, &lp.optimal_policy)?;
    let (eps_b_r, _) = chebyshev_eps_b(&q_r, &features)?;
    let (eps_b_c, _) = chebyshev_eps_b(&q_c, &features)?;
    Ok(serde_json::json!({
        "j_r_star": lp.j_r_star,
        "j_c_star": lp.j_c_star,
        "b": cmdp.threshold,
        "zeta": zeta,
        "lambda_hat_star": scan.as_ref().map(|s| s.lambda_hat_star),
        "eps_b": eps_b_r.max(eps_b_c),
        "eps_b_reward": eps_b_r,
        "eps_b_constraint": eps_b_c,
        "features": features.kind(),
        "d": features.dim(),
    }))
}

/// `coreset` subcommand payload: the chosen points, weights and the
/// worst-case leverage over all pairs.
pub fn coreset_report(config: &ExperimentConfig) -> Result<serde_json::Value, HarnessError> {
    let cmdp = config.env.build()?;
    let features = config
        .features
        .build(&cmdp)?
        .unwrap_or_else(|| crate::features::FeatureMap::one_hot(cmdp.n_states, cmdp.n_actions));
    let pairs = cmdp.state_action_pairs();
    let coreset: Coreset = match config.coreset {
        CoresetConfig::FullEnumeration => coreset_from_points(&features, &pairs, 1.0)?,
        CoresetConfig::Greedy { eps_prime, nu } => build_coreset(&features, &pairs, eps_prime, nu)?,
    };
    let sup_leverage = pairs
        .iter()
        .map(|&(s, a)| coreset.leverage(&features.featurize(s, a)))
        .fold(0.0, f64::max);
    Ok(serde_json::json!({
        "size": coreset.len(),
        "d": features.dim(),
        "points": coreset.points,
        "omega": coreset.omega,
        "nu": coreset.nu,
        "eps_prime": coreset.eps_prime,
        "sup_leverage": sup_leverage,
        "within_kw_size_bound": coreset.within_kw_size_bound(),
    }))
}
