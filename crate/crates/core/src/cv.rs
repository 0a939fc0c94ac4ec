//! Pipeline selection by K-fold cross-validation, and inference conditional on
//! the selected candidate.

use alloc::vec::Vec;

use crate::components::{pipeline_imputation, run_on_imputed, run_pipeline, ImputationMap, Selection};
use crate::dataset::{GaussianModel, MaskedDataset};
use crate::error::{Error, Result};
use crate::events::ParamLine;
use crate::graph::PipelineGraph;
use crate::inference::{build_test_direction, decompose, finish_test, SelectiveTestResult};
use crate::interval::{solve_quadratic_inequality, Interval};
use crate::linalg::{gather, norm_sq, LeastSquares, Matrix};
use crate::search::{search_window, sweep, Tracer};

/// Training and validation rows of each fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub folds: Vec<(Vec<usize>, Vec<usize>)>,
}

impl Folds {
    /// Contiguous blocks of `permutation`; the first `n mod k` blocks get one extra row.
    pub fn from_permutation(permutation: &[usize], k: usize) -> Result<Self> {
        let n = permutation.len();
        if k < 2 || k > n {
            return Err(Error::InvalidParameter(alloc::format!("{k} folds for {n} rows")));
        }
        let mut seen = alloc::vec![false; n];
        for &i in permutation {
            if i >= n || core::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter("fold order is not a permutation".into()));
            }
        }
        let (base, extra) = (n / k, n % k);
        let mut start = 0;
        let mut folds = Vec::with_capacity(k);
        for f in 0..k {
            let len = base + usize::from(f < extra);
            let mut valid = permutation[start..start + len].to_vec();
            valid.sort_unstable();
            let train = (0..n).filter(|i| valid.binary_search(i).is_err()).collect();
            folds.push((train, valid));
            start += len;
        }
        Ok(Folds { folds })
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub pipelines: Vec<PipelineGraph>,
    pub folds: Folds,
}

// Validation residual of one fold as an affine function of the imputed response:
// (y_V − X_{V,M} β̂) evaluated on the two components of a line.
fn fold_residual(
    x: &Matrix,
    train: &[usize],
    valid: &[usize],
    fold_sel: &Selection,
    ys: &[&[f64]],
) -> Result<Vec<Vec<f64>>> {
    let kept: Vec<usize> = (0..train.len()).filter(|i| fold_sel.outliers.binary_search(i).is_err()).map(|i| train[i]).collect();
    if fold_sel.features.is_empty() {
        return Ok(ys.iter().map(|y| gather(y, valid)).collect());
    }
    if kept.len() < fold_sel.features.len() {
        return Err(Error::DegreesOfFreedom { n: kept.len(), d: fold_sel.features.len() });
    }
    let ls = LeastSquares::new(x.select(&kept, &fold_sel.features), "cross-validation refit")?;
    let xv = x.select(valid, &fold_sel.features);
    Ok(ys
        .iter()
        .map(|y| {
            let beta = ls.coefficients(&gather(y, &kept));
            let pred = xv.matvec(&beta);
            valid.iter().zip(pred).map(|(&i, p)| y[i] - p).collect()
        })
        .collect())
}

/// Σ_k ‖(D y)_{V_k} − X_{V_k,M_k} β̂_k‖² / |V_k|.
pub fn cv_error(graph: &PipelineGraph, dataset: &MaskedDataset, folds: &Folds) -> Result<f64> {
    let d = pipeline_imputation(graph, dataset.x(), dataset.missing())?;
    cv_error_imputed(graph, dataset.x(), &d.apply(dataset.y_obs()), folds)
}

fn cv_error_imputed(graph: &PipelineGraph, x: &Matrix, y_plus: &[f64], folds: &Folds) -> Result<f64> {
    let mut total = 0.0;
    for (train, valid) in &folds.folds {
        let sel = run_on_imputed(graph, &x.select_rows(train), &gather(y_plus, train))?;
        let r = fold_residual(x, train, valid, &sel, &[y_plus])?;
        total += norm_sq(&r[0]) / valid.len() as f64;
    }
    Ok(total)
}

/// CV error of every candidate, `None` for candidates whose preconditions fail on some fold.
pub fn cv_errors(candidates: &CandidateSet, dataset: &MaskedDataset) -> Result<Vec<Option<f64>>> {
    candidates
        .pipelines
        .iter()
        .map(|g| match cv_error(g, dataset, &candidates.folds) {
            Ok(e) => Ok(Some(e)),
            Err(e) if e.is_structural() => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Lowest-index minimiser of the CV error among feasible candidates.
pub fn select_pipeline_cv<'c>(candidates: &'c CandidateSet, dataset: &MaskedDataset) -> Result<(usize, &'c PipelineGraph)> {
    let errors = cv_errors(candidates, dataset)?;
    let best = argmin(&errors).ok_or(Error::NoFeasibleCandidate)?;
    Ok((best, &candidates.pipelines[best]))
}

fn argmin(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (s, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((s, v));
            }
        }
    }
    best.map(|(s, _)| s)
}

/// Result of the CV-aware interval computation at one `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSegment {
    pub interval: Interval,
    pub chosen: Option<usize>,
    pub selection: Option<Selection>,
}

/// Per-candidate and per-fold tracers along one line in the observed-response frame.
pub struct CvTracer<'a> {
    candidates: &'a CandidateSet,
    x: Matrix,
    imputations: Vec<ImputationMap>,
    fold_tracers: Vec<Vec<Tracer<'a>>>,
    full_tracers: Vec<Tracer<'a>>,
    // (D^s a, D^s b) per candidate
    imputed: Vec<ParamLine>,
}

impl<'a> CvTracer<'a> {
    pub fn new(candidates: &'a CandidateSet, x: &Matrix, missing: &[bool], line: ParamLine) -> Result<Self> {
        let mut imputations = Vec::new();
        let mut fold_tracers = Vec::new();
        let mut full_tracers = Vec::new();
        let mut imputed = Vec::new();
        for g in &candidates.pipelines {
            let d = pipeline_imputation(g, x, missing)?;
            let yl = line.map(d.matrix());
            let mut per_fold = Vec::new();
            for (train, _) in &candidates.folds.folds {
                let xt = x.select_rows(train);
                let id = ImputationMap::identity(train.len());
                per_fold.push(Tracer::with_imputation(g, &xt, id, yl.restrict(train))?);
            }
            fold_tracers.push(per_fold);
            full_tracers.push(Tracer::with_imputation(g, x, d.clone(), line.clone())?);
            imputations.push(d);
            imputed.push(yl);
        }
        Ok(CvTracer { candidates, x: x.clone(), imputations, fold_tracers, full_tracers, imputed })
    }

    pub fn set_line(&mut self, line: ParamLine) -> Result<()> {
        for (s, d) in self.imputations.iter().enumerate() {
            let yl = line.map(d.matrix());
            for (k, (train, _)) in self.candidates.folds.folds.iter().enumerate() {
                self.fold_tracers[s][k].set_line(yl.restrict(train))?;
            }
            self.full_tracers[s].set_line(line.clone())?;
            self.imputed[s] = yl;
        }
        Ok(())
    }

    /// CV error of every candidate as a quadratic `[α, β, γ]` in `r`, valid on the
    /// returned interval around `z` where all fold selections stay fixed. `None`
    /// marks candidates whose preconditions fail on some fold.
    pub fn cv_quadratics(&mut self, z: f64) -> Result<(Interval, Vec<Option<[f64; 3]>>)> {
        let mut interval = Interval::REAL_LINE;
        let mut quads: Vec<Option<[f64; 3]>> = Vec::with_capacity(self.fold_tracers.len());
        for s in 0..self.fold_tracers.len() {
            let mut q = Some([0.0; 3]);
            for (k, (train, valid)) in self.candidates.folds.folds.iter().enumerate() {
                let seg = self.fold_tracers[s][k].update_interval(z)?;
                interval.tighten(seg.interval);
                let (Some(sel), Some(acc)) = (seg.selection, q.as_mut()) else {
                    q = None;
                    continue;
                };
                let line = &self.imputed[s];
                match fold_residual(&self.x, train, valid, &sel, &[&line.a, &line.b]) {
                    Ok(r) => {
                        let w = 1.0 / valid.len() as f64;
                        acc[0] += w * norm_sq(&r[1]);
                        acc[1] += w * 2.0 * crate::linalg::dot(&r[0], &r[1]);
                        acc[2] += w * norm_sq(&r[0]);
                    }
                    Err(e) if e.is_structural() => q = None,
                    Err(e) => return Err(e),
                }
            }
            quads.push(q);
        }
        Ok((interval, quads))
    }

    /// Interval around `z` on which the chosen candidate and its `(M, O)` stay fixed.
    pub fn cv_truncation(&mut self, z: f64) -> Result<CvSegment> {
        let (mut interval, quads) = self.cv_quadratics(z)?;
        let values: Vec<Option<f64>> = quads.iter().map(|q| q.map(|[a, b, c]| (a * z + b) * z + c)).collect();
        let Some(chosen) = argmin(&values) else {
            return Ok(CvSegment { interval, chosen: None, selection: None });
        };
        let best = quads[chosen].expect("feasible");
        for (s, q) in quads.iter().enumerate() {
            if let (true, Some(q)) = (s != chosen, q) {
                let iv = solve_quadratic_inequality(best[0] - q[0], best[1] - q[1], best[2] - q[2], z)?;
                interval.tighten(iv);
            }
        }
        let seg = self.full_tracers[chosen].update_interval(z)?;
        interval.tighten(seg.interval);
        Ok(CvSegment { interval, chosen: Some(chosen), selection: seg.selection })
    }
}

/// Selects a candidate by CV, then tests its selected features conditionally on
/// both the CV choice and `(M, O)`.
pub fn test_features_cv(
    candidates: &CandidateSet,
    dataset: &MaskedDataset,
    model: &GaussianModel,
) -> Result<(usize, Vec<SelectiveTestResult>)> {
    test_features_cv_with(candidates, dataset, model, |m| m.to_vec())
}

/// As [`test_features_cv`], testing only the features `choose` picks from the selected set.
pub fn test_features_cv_with(
    candidates: &CandidateSet,
    dataset: &MaskedDataset,
    model: &GaussianModel,
    choose: impl FnOnce(&[usize]) -> Vec<usize>,
) -> Result<(usize, Vec<SelectiveTestResult>)> {
    let (s_star, graph) = select_pipeline_cv(candidates, dataset)?;
    let output = run_pipeline(graph, dataset)?;
    let target = output.selection();
    let chosen = choose(&target.features);
    if chosen.is_empty() {
        return Ok((s_star, Vec::new()));
    }
    let d = pipeline_imputation(graph, dataset.x(), dataset.missing())?;
    let mut tracer: Option<CvTracer<'_>> = None;
    let mut results = Vec::with_capacity(chosen.len());
    for &j in &chosen {
        let r = test_one_cv(candidates, dataset, &d, &target, s_star, j, model.sigma(), &mut tracer);
        results.push(r.map_err(|e| e.for_feature(j))?);
    }
    Ok((s_star, results))
}

#[allow(clippy::too_many_arguments)]
fn test_one_cv<'a>(
    candidates: &'a CandidateSet,
    dataset: &MaskedDataset,
    imputation: &ImputationMap,
    target: &Selection,
    s_star: usize,
    j: usize,
    sigma: f64,
    tracer: &mut Option<CvTracer<'a>>,
) -> Result<SelectiveTestResult> {
    let y = dataset.y_obs();
    let dir = build_test_direction(dataset.x(), imputation, target, j, y, sigma)?;
    let line = decompose(y, &dir.eta);
    let tr = match tracer {
        Some(tr) => {
            tr.set_line(line)?;
            tr
        }
        None => tracer.insert(CvTracer::new(candidates, dataset.x(), dataset.missing(), line)?),
    };
    let at_obs = tr.cv_truncation(dir.z_obs)?;
    if at_obs.chosen != Some(s_star) || at_obs.selection.as_ref() != Some(target) {
        return Err(Error::TargetMismatch { z: dir.z_obs });
    }
    let sw = sweep(search_window(dir.z_obs, dir.sigma_t), |z| {
        let seg = tr.cv_truncation(z)?;
        Ok((seg.interval, seg.chosen == Some(s_star) && seg.selection.as_ref() == Some(target)))
    })?;
    finish_test(&dir, at_obs.interval, sw)
}
