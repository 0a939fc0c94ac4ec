//! Forward execution of the component algorithms and of whole pipelines.

pub mod imputation;
pub mod lasso;
pub mod outlier;
pub mod selection;

use alloc::vec::Vec;

pub use imputation::{build_imputation_map, ImputationMap};
pub use outlier::{detect_outliers, detect_outliers_cook, detect_outliers_dffits, detect_outliers_soft_ipod};
pub use selection::{select_features, select_lasso, select_marginal, select_stepwise};

use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};
use crate::graph::{CombineOp, CombineTarget, ComponentKind, PipelineGraph};
use crate::linalg::{gather, Matrix};

/// Union or intersection of sorted, duplicate-free index sets.
pub fn combine_sets(op: CombineOp, sets: &[&[usize]]) -> Vec<usize> {
    let Some((first, rest)) = sets.split_first() else { return Vec::new() };
    let mut out: Vec<usize> = first.to_vec();
    for s in rest {
        out = match op {
            CombineOp::Union => {
                let mut u: Vec<usize> = out.iter().chain(s.iter()).copied().collect();
                u.sort_unstable();
                u.dedup();
                u
            }
            CombineOp::Intersection => out.into_iter().filter(|i| s.binary_search(i).is_ok()).collect(),
        };
    }
    out
}

/// Kept rows `[n] \ O` and kept columns `M`, translating local to global ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LocalMap {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl LocalMap {
    pub fn new(n: usize, outliers: &[usize], features: &[usize]) -> Self {
        let rows = (0..n).filter(|i| outliers.binary_search(i).is_err()).collect();
        LocalMap { rows, cols: features.to_vec() }
    }

    pub fn design(&self, x: &Matrix) -> Matrix {
        x.select(&self.rows, &self.cols)
    }

    pub fn response(&self, y: &[f64]) -> Vec<f64> {
        gather(y, &self.rows)
    }

    pub fn global_rows(&self, local: &[usize]) -> Vec<usize> {
        local.iter().map(|&i| self.rows[i]).collect()
    }

    pub fn global_cols(&self, local: &[usize]) -> Vec<usize> {
        local.iter().map(|&j| self.cols[j]).collect()
    }
}

/// The selection made by a pipeline, in global ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Selection {
    pub features: Vec<usize>,
    pub outliers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub y_plus: Vec<f64>,
    pub outliers: Vec<usize>,
    pub features: Vec<usize>,
}

impl PipelineOutput {
    pub fn selection(&self) -> Selection {
        Selection { features: self.features.clone(), outliers: self.outliers.clone() }
    }
}

/// The imputation map of `graph` for this design and mask; identity when the
/// graph has no imputation node, which then requires a complete response.
pub fn pipeline_imputation(graph: &PipelineGraph, x: &Matrix, missing: &[bool]) -> Result<ImputationMap> {
    match graph.imputation() {
        Some(method) => build_imputation_map(method, x, missing),
        None if missing.iter().any(|&m| m) => Err(Error::Placement(
            "the response has missing entries but the pipeline has no imputation node".into(),
        )),
        None => Ok(ImputationMap::identity(x.rows())),
    }
}

/// Runs the pipeline on an imputed response `y_plus` of length `n`.
pub fn run_on_imputed(graph: &PipelineGraph, x: &Matrix, y_plus: &[f64]) -> Result<Selection> {
    let d = x.cols();
    let n = x.rows();
    let mut states: Vec<Option<Selection>> = alloc::vec![None; graph.nodes().len()];
    for &v in graph.topological_order() {
        let preds = graph.predecessors(v);
        let input = |k: usize| states[preds[k]].as_ref().expect("predecessor state");
        let next = match *graph.kind(v) {
            ComponentKind::Source => Selection { features: (0..d).collect(), outliers: Vec::new() },
            ComponentKind::Sink
            | ComponentKind::Mvi(_)
            | ComponentKind::ExtractFeatures
            | ComponentKind::RemoveOutliers => input(0).clone(),
            ComponentKind::Od(method) => {
                let s = input(0);
                let map = scoped(n, s, v)?;
                let local = detect_outliers(method, &map.design(x), &map.response(y_plus))?;
                let outliers = combine_sets(CombineOp::Union, &[&s.outliers, &map.global_rows(&local)]);
                Selection { features: s.features.clone(), outliers }
            }
            ComponentKind::Fs(method) => {
                let s = input(0);
                let map = scoped(n, s, v)?;
                let local = select_features(method, &map.design(x), &map.response(y_plus))?;
                Selection { features: map.global_cols(&local), outliers: s.outliers.clone() }
            }
            ComponentKind::Combine { op, target } => {
                let inputs: Vec<&Selection> = (0..preds.len()).map(input).collect();
                combine_states(v, op, target, &inputs)?
            }
        };
        states[v] = Some(next);
    }
    Ok(states[graph.sink()].take().expect("sink state"))
}

pub(crate) fn scoped(n: usize, s: &Selection, node: usize) -> Result<LocalMap> {
    let map = LocalMap::new(n, &s.outliers, &s.features);
    if map.rows.is_empty() || map.cols.is_empty() {
        return Err(Error::EmptySelection { node });
    }
    Ok(map)
}

pub(crate) fn combine_states(node: usize, op: CombineOp, target: CombineTarget, inputs: &[&Selection]) -> Result<Selection> {
    let first = inputs[0];
    match target {
        CombineTarget::Features => {
            if inputs.iter().any(|s| s.outliers != first.outliers) {
                return Err(Error::BranchConsistency { node });
            }
            let sets: Vec<&[usize]> = inputs.iter().map(|s| s.features.as_slice()).collect();
            Ok(Selection { features: combine_sets(op, &sets), outliers: first.outliers.clone() })
        }
        CombineTarget::Outliers => {
            if inputs.iter().any(|s| s.features != first.features) {
                return Err(Error::BranchConsistency { node });
            }
            let sets: Vec<&[usize]> = inputs.iter().map(|s| s.outliers.as_slice()).collect();
            Ok(Selection { features: first.features.clone(), outliers: combine_sets(op, &sets) })
        }
    }
}

/// Imputes, then runs every node in topological order on concrete data.
pub fn run_pipeline(graph: &PipelineGraph, dataset: &MaskedDataset) -> Result<PipelineOutput> {
    let map = pipeline_imputation(graph, dataset.x(), dataset.missing())?;
    let y_plus = map.apply(dataset.y_obs());
    let sel = run_on_imputed(graph, dataset.x(), &y_plus)?;
    Ok(PipelineOutput { y_plus, outliers: sel.outliers, features: sel.features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn set_algebra() {
        assert_eq!(combine_sets(CombineOp::Union, &[&[1, 2], &[2, 3]]), vec![1, 2, 3]);
        assert_eq!(combine_sets(CombineOp::Intersection, &[&[1, 2], &[2, 3]]), vec![2]);
        assert!(combine_sets(CombineOp::Intersection, &[&[1], &[2]]).is_empty());
    }

    #[test]
    fn local_map_translates() {
        let m = LocalMap::new(5, &[1, 3], &[0, 2]);
        assert_eq!(m.rows, vec![0, 2, 4]);
        assert_eq!(m.global_rows(&[1, 2]), vec![2, 4]);
        assert_eq!(m.global_cols(&[1]), vec![2]);
    }
}
