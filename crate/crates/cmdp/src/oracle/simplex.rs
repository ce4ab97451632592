//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Solves `min c^T x` subject to `A x {<=,=,>=} b`, `x >= 0`. Problem sizes
//! here are a few hundred variables by ~100 rows, so the tableau is kept
//! dense and reduced costs are recomputed from the basis every iteration
//! rather than carried (slower, but immune to drift).

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One constraint row `coeffs . x (sense) rhs`.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {0} has {1} coefficients, expected {2}")]
    RowShape(usize, usize, usize),
    #[error("simplex iteration limit reached ({0} pivots)")]
    IterationLimit(usize),
    #[error("non-finite value in LP input")]
    NonFinite,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        self.rhs[row] /= piv;
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..self.n_cols {
                let delta = factor * self.rows[row][j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Reduced cost of column `col` under cost vector `cost`.
    fn reduced_cost(&self, cost: &[f64], col: usize) -> f64 {
        let mut rc = cost[col];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                rc -= cb * self.rows[i][col];
            }
        }
        rc
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs[i])
            .sum()
    }

    /// Bland's rule: enter the lowest-index improving column, leave by the
    /// minimum ratio breaking ties on the lowest basis variable index.
    fn run(&mut self, cost: &[f64], active_cols: usize) -> Result<bool, LpError> {
        let limit = 10_000 + 200 * (self.rows.len() + active_cols);
        for _ in 0..limit {
            let mut entering = None;
            for j in 0..active_cols {
                if self.reduced_cost(cost, j) < -COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true); // optimal
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((best_i, best_ratio)) => {
                            if ratio < best_ratio - PIVOT_TOL
                                || (ratio < best_ratio + PIVOT_TOL
                                    && self.basis[i] < self.basis[best_i])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false); // unbounded
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit(limit))
    }
}

/// Minimizes `objective . x` over `x >= 0` subject to `rows`.
pub fn solve_lp(objective: &[f64], rows: &[LpRow]) -> Result<LpOutcome, LpError> {
    let n = objective.len();
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite);
    }
    for (i, row) in rows.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(LpError::RowShape(i, row.coeffs.len(), n));
        }
        if row.coeffs.iter().any(|v| !v.is_finite()) || !row.rhs.is_finite() {
            return Err(LpError::NonFinite);
        }
    }

    // normalize to rhs >= 0
    let rows: Vec<LpRow> = rows
        .iter()
        .map(|r| {
            if r.rhs < 0.0 {
                LpRow {
                    coeffs: r.coeffs.iter().map(|v| -v).collect(),
                    sense: match r.sense {
                        Sense::Le => Sense::Ge,
                        Sense::Eq => Sense::Eq,
                        Sense::Ge => Sense::Le,
                    },
                    rhs: -r.rhs,
                }
            } else {
                r.clone()
            }
        })
        .collect();

    let m = rows.len();
    let n_aux = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let art_start = n + n_aux;
    let n_cols = art_start + n_art;

    let mut tab = Tableau {
        rows: vec![vec![0.0; n_cols]; m],
        rhs: rows.iter().map(|r| r.rhs).collect(),
        basis: vec![0; m],
        n_cols,
    };
    let mut aux = n;
    let mut art = art_start;
    for (i, row) in rows.iter().enumerate() {
        tab.rows[i][..n].copy_from_slice(&row.coeffs);
        match row.sense {
            Sense::Le => {
                tab.rows[i][aux] = 1.0;
                tab.basis[i] = aux;
                aux += 1;
            }
            Sense::Ge => {
                tab.rows[i][aux] = -1.0;
                aux += 1;
                tab.rows[i][art] = 1.0;
                tab.basis[i] = art;
                art += 1;
            }
            Sense::Eq => {
                tab.rows[i][art] = 1.0;
                tab.basis[i] = art;
                art += 1;
            }
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; n_cols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        if !tab.run(&phase1, n_cols)? {
            // bounded below by zero, so this cannot happen
            return Ok(LpOutcome::Unbounded);
        }
        if tab.objective(&phase1) > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis; a row with no real
        // pivot candidate is redundant and gets dropped
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in tab.rows.iter_mut() {
            row.truncate(art_start);
        }
        tab.n_cols = art_start;
    }

    let mut cost = vec![0.0; tab.n_cols];
    cost[..n].copy_from_slice(objective);
    if !tab.run(&cost, tab.n_cols)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; tab.n_cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        x[b] = tab.rhs[i];
    }
    x.truncate(n);
    let objective_value = crate::eval::dot(objective, &x);
    Ok(LpOutcome::Optimal {
        x,
        objective: objective_value,
    })
}
