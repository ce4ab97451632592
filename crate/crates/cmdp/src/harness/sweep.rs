//! Hyperparameter sweeps: independent cells, per-cell aggregation over
//! seeds, best-cell selection and the summary CSV.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::harness::runner::{oracle_context, run_cell};
use crate::harness::{ExperimentConfig, HarnessError};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// At least one seed failed; the message is the first failure.
    Failed(String),
}

/// Aggregated outcome of one hyperparameter cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub index: usize,
    pub label: String,
    pub status: CellStatus,
    pub per_seed_og: Vec<f64>,
    pub per_seed_cv: Vec<f64>,
    pub mean_og: f64,
    pub ci95_og: f64,
    pub mean_cv: f64,
    pub ci95_cv: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    /// Index into `cells` of the best cell: least mean OG among cells whose
    /// mean CV lies in `[-0.25, 0]`.
    pub best: Option<usize>,
    pub summary_path: PathBuf,
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // reported as mean +/- 1.96 * stderr (normal approximation)
    (mean, 1.96 * (var / n).sqrt())
}

/// Runs every `(cell, seed)` pair of the config's grids. Cells execute in a
/// work pool (`jobs` threads); a failing cell is recorded and does not abort
/// its siblings. Per-run seeds come from a counter-based split of the
/// config seed list, written into each CSV header.
pub fn run_sweep(
    config: &ExperimentConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, HarnessError> {
    let cmdp = config.env.build()?;
    let ctx = oracle_context(&cmdp)?;
    let cells = config.algorithm.cells();
    let out_dir = Path::new(&config.output);
    let runs_dir = out_dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|source| HarnessError::Io {
        path: runs_dir.clone(),
        source,
    })?;

    let mut tasks = Vec::new();
    for (cell_idx, (label, algorithm)) in cells.iter().enumerate() {
        for (seed_idx, &seed) in config.seeds.iter().enumerate() {
            let run_seed = seeding::derive(seed, 0xCE11, cell_idx as u64);
            tasks.push((
                cell_idx,
                label.clone(),
                algorithm.clone(),
                seed_idx,
                seed,
                run_seed,
            ));
        }
    }

    // (cell index, seed index, final (og, cv) or failure message)
    type CellOutcome = (usize, usize, Result<(f64, f64), String>);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("could not build worker pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(cell_idx, label, algorithm, seed_idx, seed, run_seed)| {
                let result = run_cell(&cmdp, &ctx, config, algorithm.clone(), label, *run_seed)
                    .and_then(|artifacts| {
                        let path = runs_dir.join(format!("cell{cell_idx}_seed{seed}.csv"));
                        std::fs::write(&path, &artifacts.csv)
                            .map_err(|source| HarnessError::Io { path, source })?;
                        Ok((artifacts.final_og, artifacts.final_cv))
                    })
                    .map_err(|e| e.to_string());
                (*cell_idx, *seed_idx, result)
            })
            .collect()
    });

    let mut results: Vec<CellResult> = cells
        .iter()
        .enumerate()
        .map(|(index, (label, _))| CellResult {
            index,
            label: label.clone(),
            status: CellStatus::Ok,
            per_seed_og: Vec::new(),
            per_seed_cv: Vec::new(),
            mean_og: f64::NAN,
            ci95_og: f64::NAN,
            mean_cv: f64::NAN,
            ci95_cv: f64::NAN,
        })
        .collect();
    let mut ordered = outcomes;
    ordered.sort_by_key(|(cell, seed_idx, _)| (*cell, *seed_idx));
    for (cell_idx, _, outcome) in ordered {
        let cell = &mut results[cell_idx];
        match outcome {
            Ok((og, cv)) => {
                cell.per_seed_og.push(og);
                cell.per_seed_cv.push(cv);
            }
            Err(msg) => {
                if cell.status == CellStatus::Ok {
                    cell.status = CellStatus::Failed(msg);
                }
            }
        }
    }
    for cell in &mut results {
        if cell.status == CellStatus::Ok {
            let (mean_og, ci_og) = mean_and_ci(&cell.per_seed_og);
            let (mean_cv, ci_cv) = mean_and_ci(&cell.per_seed_cv);
            cell.mean_og = mean_og;
            cell.ci95_og = ci_og;
            cell.mean_cv = mean_cv;
            cell.ci95_cv = ci_cv;
        }
    }

    let best = results
        .iter()
        .filter(|c| c.status == CellStatus::Ok && !c.mean_og.is_nan())
        .filter(|c| (-0.25..=0.0).contains(&c.mean_cv))
        .min_by(|a, b| a.mean_og.total_cmp(&b.mean_og))
        .map(|c| c.index);

    let summary_path = out_dir.join("summary.csv");
    let mut summary = String::from(
        "cell,label,status,n_seeds,mean_final_og,ci95_og,mean_final_cv,ci95_cv,best\n",
    );
    for cell in &results {
        let status = match &cell.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.index,
            cell.label.replace(',', ";"),
            status,
            cell.per_seed_og.len(),
            cell.mean_og,
            cell.ci95_og,
            cell.mean_cv,
            cell.ci95_cv,
            if best == Some(cell.index) { 1 } else { 0 },
        ));
    }
    std::fs::write(&summary_path, summary).map_err(|source| HarnessError::Io {
        path: summary_path.clone(),
        source,
    })?;

    Ok(SweepResult {
        cells: results,
        best,
        summary_path,
    })
}

/// Renders a plain-text digest of a sweep output directory from its
/// `summary.csv`.
pub fn report_dir(dir: &Path) -> Result<String, HarnessError> {
    let summary_path = dir.join("summary.csv");
    let text = std::fs::read_to_string(&summary_path).map_err(|source| HarnessError::Io {
        path: summary_path,
        source,
    })?;
    let mut out = String::new();
    let mut best_line = None;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 9 {
            continue;
        }
        out.push_str(&format!(
            "cell {:>3}  {:<40} {:<10} og {:>12} +/- {:<12} cv {:>12} +/- {:<12}\n",
            fields[0],
            fields[1],
            fields[2],
            trim_num(fields[4]),
            trim_num(fields[5]),
            trim_num(fields[6]),
            trim_num(fields[7]),
        ));
        if fields[8] == "1" {
            best_line = Some(format!("best cell: {} ({})", fields[0], fields[1]));
        }
    }
    out.push_str(
        &best_line
            .unwrap_or_else(|| "best cell: none (no cell satisfied CV in [-0.25, 0])".to_string()),
    );
    out.push('\n');
    Ok(out)
}

fn trim_num(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) => format!("{v:.6}"),
        Err(_) => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_sweep_matches_solo_run() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{"env": {{"kind": "random", "n_states": 4, "n_actions": 2, "seed": 1}},
                "algorithm": {{"name": "gda", "alpha_pi": 0.5, "alpha_lambda": 0.1}},
                "T": 5, "seeds": [7],
                "dual_cap": {{"source": "oracle"}},
                "output": "{}"}}"#,
            dir.path().display()
        );
        let config = ExperimentConfig::from_json(&text).unwrap();
        let sweep = run_sweep(&config, Some(1)).unwrap();
        assert_eq!(sweep.cells.len(), 1);
        assert_eq!(sweep.cells[0].per_seed_og.len(), 1);

        let cmdp = config.env.build().unwrap();
        let ctx = oracle_context(&cmdp).unwrap();
        let solo = run_cell(
            &cmdp,
            &ctx,
            &config,
            crate::solvers::AlgorithmSpec::Gda {
                alpha_pi: 0.5,
                alpha_lambda: 0.1,
            },
            "alpha_pi=0.5,alpha_lambda=0.1",
            seeding::derive(7, 0xCE11, 0),
        )
        .unwrap();
        assert_eq!(sweep.cells[0].per_seed_og[0], solo.final_og);
        assert!(sweep.summary_path.exists());
    }

    #[test]
    fn failing_cell_does_not_abort_siblings() {
        let dir = tempfile::tempdir().unwrap();
        // alpha_lambda = 0 is rejected by the practical dual; -1 likewise;
        // 8 succeeds
        let text = format!(
            r#"{{"env": {{"kind": "random", "n_states": 3, "n_actions": 2, "seed": 2}},
                "algorithm": {{"name": "cbp_practical", "alpha_lambda": [0.0, 8.0]}},
                "T": 4, "seeds": [0],
                "dual_cap": {{"source": "oracle"}},
                "output": "{}"}}"#,
            dir.path().display()
        );
        let config = ExperimentConfig::from_json(&text).unwrap();
        let sweep = run_sweep(&config, Some(1)).unwrap();
        assert!(matches!(sweep.cells[0].status, CellStatus::Failed(_)));
        assert!(matches!(sweep.cells[1].status, CellStatus::Ok));
        let report = report_dir(dir.path()).unwrap();
        assert!(report.contains("cell"));
    }
}
