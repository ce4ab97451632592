//! Greedy G-optimal experimental design.
//!
//! Builds a coreset of state-action pairs whose Gram matrix controls the
//! extrapolation error of weighted least-squares fits. Construction keeps a
//! ridge inverse `(nu I + sum_{z in C} phi(z) phi(z)^T)^{-1}` up to date with
//! rank-one Sherman-Morrison updates; the marginal gain of a candidate is its
//! leverage `sqrt(phi^T ginv phi)` under that inverse, and the greedy loop
//! inserts the argmax until the maximum gain drops to `eps_prime`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::features::FeatureMap;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("coreset enumeration must be nonempty")]
    EmptyEnumeration,
    #[error("eps_prime must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("ridge nu must be positive for incremental construction, got {0}")]
    NonPositiveRidge(f64),
    #[error("greedy design did not reach eps_prime within {cap} insertions (max gain {gain})")]
    InsertionCap { cap: usize, gain: f64 },
}

/// Selected design points with their weights and Gram operators.
///
/// `gram` is the omega-weighted Gram matrix used by least-squares fits;
/// `ginv` is the construction-time ridge inverse, the quantity the greedy
/// termination rule controls.
#[derive(Debug, Clone)]
pub struct Coreset {
    pub points: Vec<(usize, usize)>,
    pub omega: Vec<f64>,
    pub gram: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub nu: f64,
    pub eps_prime: f64,
    point_features: Vec<DVector<f64>>,
    gram_pinv: DMatrix<f64>,
    gram_rank: usize,
    gain_history: Vec<f64>,
}

/// Greedy construction over `enumerate`; terminates once every candidate's
/// leverage is at most `eps_prime`. Points may repeat (a repeat further
/// shrinks that direction's leverage); the insertion count is capped at the
/// enumeration size.
pub fn build_coreset(
    features: &FeatureMap,
    enumerate: &[(usize, usize)],
    eps_prime: f64,
    nu: f64,
) -> Result<Coreset, DesignError> {
    if enumerate.is_empty() {
        return Err(DesignError::EmptyEnumeration);
    }
    if eps_prime <= 0.0 {
        return Err(DesignError::NonPositiveTolerance(eps_prime));
    }
    if nu <= 0.0 {
        return Err(DesignError::NonPositiveRidge(nu));
    }
    let d = features.dim();
    let cand: Vec<DVector<f64>> = enumerate
        .iter()
        .map(|&(s, a)| DVector::from_vec(features.featurize(s, a)))
        .collect();

    let mut ginv = DMatrix::identity(d, d) / nu;
    let mut points = Vec::new();
    let mut point_features = Vec::new();
    let mut gain_history = Vec::new();
    let cap = enumerate.len();

    loop {
        let mut best = 0usize;
        let mut g_max = f64::NEG_INFINITY;
        for (i, phi) in cand.iter().enumerate() {
            let g = quad_form(&ginv, phi).max(0.0).sqrt();
            if g > g_max {
                g_max = g;
                best = i;
            }
        }
        if g_max <= eps_prime {
            break;
        }
        if points.len() >= cap {
            return Err(DesignError::InsertionCap { cap, gain: g_max });
        }
        gain_history.push(g_max);
        let phi = &cand[best];
        sherman_morrison_update(&mut ginv, phi);
        points.push(enumerate[best]);
        point_features.push(phi.clone());
    }

    Ok(finish_coreset(
        points,
        point_features,
        ginv,
        nu,
        eps_prime,
        gain_history,
        d,
    ))
}

/// Coreset over an explicit point list (no greedy selection); used for
/// full-enumeration designs and hand-built fixtures.
pub fn coreset_from_points(
    features: &FeatureMap,
    points: &[(usize, usize)],
    nu: f64,
) -> Result<Coreset, DesignError> {
    if points.is_empty() {
        return Err(DesignError::EmptyEnumeration);
    }
    if nu <= 0.0 {
        return Err(DesignError::NonPositiveRidge(nu));
    }
    let d = features.dim();
    let point_features: Vec<DVector<f64>> = points
        .iter()
        .map(|&(s, a)| DVector::from_vec(features.featurize(s, a)))
        .collect();
    let mut ginv = DMatrix::identity(d, d) / nu;
    for phi in &point_features {
        sherman_morrison_update(&mut ginv, phi);
    }
    Ok(finish_coreset(
        points.to_vec(),
        point_features,
        ginv,
        nu,
        0.0,
        Vec::new(),
        d,
    ))
}

fn finish_coreset(
    points: Vec<(usize, usize)>,
    point_features: Vec<DVector<f64>>,
    ginv: DMatrix<f64>,
    nu: f64,
    eps_prime: f64,
    gain_history: Vec<f64>,
    d: usize,
) -> Coreset {
    let n = points.len();
    let omega = vec![if n > 0 { 1.0 / n as f64 } else { 0.0 }; n];
    let mut gram = DMatrix::zeros(d, d);
    for (phi, &w) in point_features.iter().zip(&omega) {
        gram += phi * phi.transpose() * w;
    }
    let (gram_pinv, gram_rank) = pseudo_inverse(&gram);
    Coreset {
        points,
        omega,
        gram,
        ginv,
        nu,
        eps_prime,
        point_features,
        gram_pinv,
        gram_rank,
        gain_history,
    }
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ginv.nrows()
    }

    /// Construction-time leverage `sqrt(phi^T ginv phi)`.
    pub fn leverage(&self, phi: &[f64]) -> f64 {
        let v = DVector::from_column_slice(phi);
        quad_form(&self.ginv, &v).max(0.0).sqrt()
    }

    /// Extrapolation factor `||phi||_{G_omega^+}` of the weighted Gram
    /// matrix; this is the amplification constant in the least-squares error
    /// bound, as opposed to the ridge quantity used during construction.
    pub fn fit_leverage(&self, phi: &[f64]) -> f64 {
        let v = DVector::from_column_slice(phi);
        quad_form(&self.gram_pinv, &v).max(0.0).sqrt()
    }

    /// Whether the weighted Gram matrix has full rank `d`.
    pub fn gram_nonsingular(&self) -> bool {
        self.gram_rank == self.dim()
    }

    pub fn gram_pinv(&self) -> &DMatrix<f64> {
        &self.gram_pinv
    }

    pub fn point_features(&self) -> &[DVector<f64>] {
        &self.point_features
    }

    /// Maximum marginal gain observed before each insertion.
    pub fn gain_history(&self) -> &[f64] {
        &self.gain_history
    }

    /// Kiefer-Wolfowitz size check: an optimal design needs at most
    /// `d(d+1)/2` support points once the tolerance reaches `sqrt(d)`.
    /// Reported for diagnostics, never enforced (the greedy construction
    /// carries no size guarantee).
    pub fn within_kw_size_bound(&self) -> bool {
        let d = self.dim();
        self.eps_prime < (d as f64).sqrt() || self.len() <= d * (d + 1) / 2
    }
}

/// `ginv <- ginv - (ginv phi phi^T ginv) / (1 + phi^T ginv phi)`.
fn sherman_morrison_update(ginv: &mut DMatrix<f64>, phi: &DVector<f64>) {
    let gphi = &*ginv * phi;
    let denom = 1.0 + phi.dot(&gphi);
    *ginv -= &gphi * gphi.transpose() / denom;
}

fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (m * v).dot(v)
}

fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let d = m.nrows();
    if d == 0 {
        return (m.clone(), 0);
    }
    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * max_sv.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let pinv = svd
        .pseudo_inverse(tol)
        .unwrap_or_else(|_| DMatrix::zeros(d, d));
    (pinv, rank)
}
