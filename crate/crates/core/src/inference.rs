//! Test directions, the nuisance decomposition and the per-feature tests.

use alloc::vec::Vec;

use crate::components::{pipeline_imputation, run_pipeline, ImputationMap, LocalMap, Selection};
use crate::dataset::{GaussianModel, MaskedDataset};
use crate::error::{Error, Result};
use crate::events::ParamLine;
use crate::graph::PipelineGraph;
use crate::interval::{Interval, IntervalSet};
use crate::linalg::{dot, norm, norm_sq, LeastSquares, Matrix};
use crate::normal::{tn_two_sided_p, two_sided_p};
use crate::search::{line_search_truncation, search_window, Sweep, Tracer};

/// `T(y) = ηᵀ y_obs`, the least-squares coefficient of `feature` on `X_{−O,M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDirection {
    pub feature: usize,
    pub eta: Vec<f64>,
    pub z_obs: f64,
    pub sigma_t: f64,
}

/// `η_jᵀ = e_jᵀ (X_{−O,M}ᵀ X_{−O,M})⁻¹ X_{−O,M}ᵀ R_{−O} D`.
pub fn build_test_direction(
    x: &Matrix,
    imputation: &ImputationMap,
    selection: &Selection,
    feature: usize,
    y_obs: &[f64],
    sigma: f64,
) -> Result<TestDirection> {
    let pos = selection.features.binary_search(&feature).map_err(|_| Error::NotSelected { feature })?;
    let map = LocalMap::new(x.rows(), &selection.outliers, &selection.features);
    if map.rows.len() <= map.cols.len() {
        return Err(Error::DegreesOfFreedom { n: map.rows.len(), d: map.cols.len() });
    }
    let ls = LeastSquares::new(map.design(x), "test direction")?;
    let coef_row = ls.coefficient_map().row(pos).to_vec();
    let mut v = alloc::vec![0.0; x.rows()];
    for (&i, c) in map.rows.iter().zip(coef_row) {
        v[i] = c;
    }
    let eta = imputation.pull_back(&v);
    let eta_norm = norm(&eta);
    if !(eta_norm > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("test direction for feature {feature} is zero")));
    }
    Ok(TestDirection { feature, z_obs: dot(&eta, y_obs), sigma_t: sigma * eta_norm, eta })
}

/// `a = (I − ηηᵀ/‖η‖²) y`, `b = η/‖η‖²`.
pub fn decompose(y_obs: &[f64], eta: &[f64]) -> ParamLine {
    let s = norm_sq(eta);
    let t = dot(eta, y_obs);
    let b: Vec<f64> = eta.iter().map(|e| e / s).collect();
    let a = y_obs.iter().zip(&b).map(|(y, b)| y - b * t).collect();
    ParamLine { a, b }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveTestResult {
    pub feature: usize,
    pub beta_hat: f64,
    pub sigma_t: f64,
    pub p_selective: f64,
    pub p_naive: f64,
    pub p_oc: f64,
    pub truncation: IntervalSet,
    /// The single constancy segment containing the observed statistic.
    pub oc_interval: Interval,
    pub segments_visited: usize,
}

/// Assembles the three p-values from the observed segment and the sweep.
pub fn finish_test(direction: &TestDirection, oc: Interval, sweep: Sweep) -> Result<SelectiveTestResult> {
    let mut parts = sweep.set.parts().to_vec();
    parts.push(oc);
    let truncation = IntervalSet::from_parts(parts);
    let oc_set = IntervalSet::single(oc);
    let (t, s) = (direction.z_obs, direction.sigma_t);
    Ok(SelectiveTestResult {
        feature: direction.feature,
        beta_hat: t,
        sigma_t: s,
        p_selective: tn_two_sided_p(t, s, &truncation)?,
        p_naive: two_sided_p(t, s),
        p_oc: tn_two_sided_p(t, s, &oc_set)?,
        truncation,
        oc_interval: oc,
        segments_visited: sweep.segments,
    })
}

/// Runs the pipeline and tests every selected feature conditionally on `(M, O)`.
pub fn test_features(
    graph: &PipelineGraph,
    dataset: &MaskedDataset,
    model: &GaussianModel,
) -> Result<Vec<SelectiveTestResult>> {
    test_features_with(graph, dataset, model, |m| m.to_vec())
}

/// As [`test_features`], testing only the features `choose` picks from the selected set.
pub fn test_features_with(
    graph: &PipelineGraph,
    dataset: &MaskedDataset,
    model: &GaussianModel,
    choose: impl FnOnce(&[usize]) -> Vec<usize>,
) -> Result<Vec<SelectiveTestResult>> {
    let output = run_pipeline(graph, dataset)?;
    let target = output.selection();
    let chosen = choose(&target.features);
    if chosen.is_empty() {
        return Ok(Vec::new());
    }
    let imputation = pipeline_imputation(graph, dataset.x(), dataset.missing())?;
    let mut tracer: Option<Tracer<'_>> = None;
    let mut results = Vec::with_capacity(chosen.len());
    for &j in &chosen {
        let r = test_one(graph, dataset, &imputation, &target, j, model.sigma(), &mut tracer);
        results.push(r.map_err(|e| e.for_feature(j))?);
    }
    Ok(results)
}

fn test_one<'a>(
    graph: &'a PipelineGraph,
    dataset: &MaskedDataset,
    imputation: &ImputationMap,
    target: &Selection,
    j: usize,
    sigma: f64,
    tracer: &mut Option<Tracer<'a>>,
) -> Result<SelectiveTestResult> {
    let y = dataset.y_obs();
    let dir = build_test_direction(dataset.x(), imputation, target, j, y, sigma)?;
    let line = decompose(y, &dir.eta);
    let tr = match tracer {
        Some(tr) => {
            tr.set_line(line)?;
            tr
        }
        None => tracer.insert(Tracer::with_imputation(graph, dataset.x(), imputation.clone(), line)?),
    };
    let seg = tr.update_interval(dir.z_obs)?;
    if seg.selection.as_ref() != Some(target) {
        return Err(Error::TargetMismatch { z: dir.z_obs });
    }
    let sweep = line_search_truncation(tr, target, search_window(dir.z_obs, dir.sigma_t))?;
    finish_test(&dir, seg.interval, sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn coordinate_projector_decomposition() {
        let line = decompose(&[3.0, 1.0, 2.0], &[1.0, 0.0, 0.0]);
        assert_eq!(line.a, vec![0.0, 1.0, 2.0]);
        assert_eq!(line.b, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn orthonormal_column_direction() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let sel = Selection { features: vec![0, 1], outliers: vec![] };
        let y = [2.0, -1.0, 5.0];
        let dir = build_test_direction(&x, &ImputationMap::identity(3), &sel, 1, &y, 1.0).unwrap();
        assert_eq!(dir.eta, vec![0.0, 1.0, 0.0]);
        assert_eq!(dir.z_obs, -1.0);
        assert_eq!(
            build_test_direction(&x, &ImputationMap::identity(3), &sel, 2, &y, 1.0),
            Err(Error::NotSelected { feature: 2 })
        );
    }
}
