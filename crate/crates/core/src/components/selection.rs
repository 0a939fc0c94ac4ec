//! Feature selectors on a sub-design. All indices are local to the sub-design.

use alloc::vec::Vec;

use crate::components::lasso::LassoDesign;
use crate::error::{Error, Result};
use crate::graph::FsMethod;
use crate::linalg::{axpy, dot, norm, norm_sq, Matrix};
use crate::math;

/// Relative squared norm below which a residualised stepwise candidate counts as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-10;

/// Relative RSS gain at or below which stepwise stops early.
pub const STEPWISE_MIN_GAIN: f64 = 1e-12;

/// Columns scaled to unit Euclidean norm.
pub fn normalized_columns(x: &Matrix) -> Result<Vec<Vec<f64>>> {
    (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            let s = norm(&c);
            if s == 0.0 {
                return Err(Error::ZeroNormColumn { column: j });
            }
            Ok(c.iter().map(|v| v / s).collect())
        })
        .collect()
}

/// Indices of the `k` largest scores, lowest index first among ties, returned sorted.
pub(crate) fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k.min(scores.len()));
    idx.sort_unstable();
    idx
}

/// Top-`k` features by `|x̂_jᵀ y|` on unit-norm columns.
pub fn select_marginal(x: &Matrix, y: &[f64], k: usize) -> Result<Vec<usize>> {
    let cols = normalized_columns(x)?;
    let scores: Vec<f64> = cols.iter().map(|c| math::abs(dot(c, y))).collect();
    Ok(top_k(&scores, k))
}

/// Orthonormal basis of the current model space, grown one column at a time.
#[derive(Debug, Clone)]
pub struct Basis {
    vectors: Vec<Vec<f64>>,
}

impl Basis {
    /// Starts from the intercept-only null model.
    pub fn intercept(n: usize) -> Self {
        let v = alloc::vec![1.0 / math::sqrt(n as f64); n];
        Basis { vectors: alloc::vec![v] }
    }

    /// `(I − QQᵀ) v`, with a second pass for stability.
    pub fn residualize(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        r
    }

    pub fn push(&mut self, residualized: &[f64]) {
        let s = norm(residualized);
        self.vectors.push(residualized.iter().map(|v| v / s).collect());
    }
}

/// One greedy step: the residualised candidates and the choice made.
#[derive(Debug, Clone)]
pub struct StepwiseStep {
    /// `(local index, x̃_l)` for every non-collinear candidate.
    pub candidates: Vec<(usize, Vec<f64>)>,
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct StepwisePath {
    pub steps: Vec<StepwiseStep>,
    /// The null-model projector `I − 11ᵀ/n`, applied lazily.
    pub null_basis: Basis,
    /// Whether the last step stopped on the gain threshold rather than on `k` or exhaustion.
    pub stopped_on_gain: bool,
}

impl StepwisePath {
    pub fn selected(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.steps.iter().filter_map(|s| s.chosen).collect();
        s.sort_unstable();
        s
    }
}

/// Forward stepwise from the intercept model, minimising the refit RSS at each step.
///
/// The RSS drop from adding `l` is `(x̃_lᵀy)² / ‖x̃_l‖²` with `x̃_l` the column
/// residualised on the current model.
pub fn stepwise_path(x: &Matrix, y: &[f64], k: usize) -> StepwisePath {
    let (n, d) = (x.rows(), x.cols());
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let null_basis = Basis::intercept(n);
    let rss_null = norm_sq(&null_basis.residualize(y));
    let mut basis = null_basis.clone();
    let mut taken = alloc::vec![false; d];
    let mut steps = Vec::new();
    let limit = k.min(d).min(n.saturating_sub(1));
    let mut stopped_on_gain = false;
    while steps.len() < limit {
        let candidates: Vec<(usize, Vec<f64>)> = (0..d)
            .filter(|&l| !taken[l])
            .filter_map(|l| {
                let xt = basis.residualize(&columns[l]);
                (norm_sq(&xt) > COLLINEAR_TOLERANCE * norm_sq(&columns[l])).then_some((l, xt))
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (pos, (_, xt)) in candidates.iter().enumerate() {
            let c = dot(xt, y);
            let gain = c * c / norm_sq(xt);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((pos, gain));
            }
        }
        let (pos, gain) = best.expect("nonempty candidates");
        if gain <= STEPWISE_MIN_GAIN * rss_null {
            steps.push(StepwiseStep { candidates, chosen: None });
            stopped_on_gain = true;
            break;
        }
        let chosen = candidates[pos].0;
        basis.push(&candidates[pos].1);
        taken[chosen] = true;
        steps.push(StepwiseStep { candidates, chosen: Some(chosen) });
    }
    StepwisePath { steps, null_basis, stopped_on_gain }
}

pub fn select_stepwise(x: &Matrix, y: &[f64], k: usize) -> Vec<usize> {
    stepwise_path(x, y, k).selected()
}

pub fn select_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<usize>> {
    Ok(LassoDesign::new(x).solve(y, lambda, None)?.support())
}

pub fn select_features(method: FsMethod, x: &Matrix, y: &[f64]) -> Result<Vec<usize>> {
    match method {
        FsMethod::Marginal { k } => select_marginal(x, y, k),
        FsMethod::Stepwise { k } => Ok(select_stepwise(x, y, k)),
        FsMethod::Lasso { lambda } => select_lasso(x, y, lambda),
    }
}
