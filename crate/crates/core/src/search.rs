//! Interval updates along the pipeline graph and the line search over the
//! test-statistic axis.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::vec::Vec;

use crate::components::{combine_states, pipeline_imputation, scoped, ImputationMap, LocalMap, Selection};
use crate::error::{Error, Result};
use crate::events::{ParamLine, Prepared};
use crate::graph::{ComponentKind, PipelineGraph};
use crate::interval::{Interval, IntervalSet};
use crate::linalg::Matrix;

pub const MAX_SEGMENTS: usize = 100_000;
const CACHE_LIMIT: usize = 512;

/// Per-node payload: the current line, the expansion point, `(M, O)` and `[l, u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub line: Rc<ParamLine>,
    pub z: f64,
    pub selection: Selection,
    pub interval: Interval,
}

/// Constancy interval around `z` with the selection on it, or `None` when a
/// node's preconditions fail for the `(M, O)` reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub interval: Interval,
    pub selection: Option<Selection>,
}

/// Evaluates segments of one pipeline along one line, caching design-only work.
pub struct Tracer<'a> {
    graph: &'a PipelineGraph,
    x: Matrix,
    imputation: ImputationMap,
    line: Rc<ParamLine>,
    cache: BTreeMap<(usize, LocalMap), Result<Prepared>>,
}

impl<'a> Tracer<'a> {
    /// `line` lives in the observed-response frame (length `n′`).
    pub fn new(graph: &'a PipelineGraph, x: &Matrix, missing: &[bool], line: ParamLine) -> Result<Self> {
        let imputation = pipeline_imputation(graph, x, missing)?;
        Tracer::with_imputation(graph, x, imputation, line)
    }

    pub fn with_imputation(
        graph: &'a PipelineGraph,
        x: &Matrix,
        imputation: ImputationMap,
        line: ParamLine,
    ) -> Result<Self> {
        if line.len() != imputation.matrix().cols() {
            return Err(Error::Dimension(alloc::format!(
                "line of length {} for {} observed responses",
                line.len(),
                imputation.matrix().cols()
            )));
        }
        Ok(Tracer { graph, x: x.clone(), imputation, line: Rc::new(line), cache: BTreeMap::new() })
    }

    pub fn line(&self) -> &ParamLine {
        &self.line
    }

    pub fn imputation(&self) -> &ImputationMap {
        &self.imputation
    }

    /// Switches to another line, keeping the design-only cache.
    pub fn set_line(&mut self, line: ParamLine) -> Result<()> {
        if line.len() != self.line.len() {
            return Err(Error::Dimension(alloc::format!("line of length {} replaces one of {}", line.len(), self.line.len())));
        }
        self.line = Rc::new(line);
        Ok(())
    }

    /// Applies one node's update rule to the states of its predecessors.
    pub fn apply_update_rule(&mut self, node: usize, inputs: &[&NodeState]) -> Result<NodeState> {
        let first = inputs[0];
        match *self.graph.kind(node) {
            ComponentKind::Source
            | ComponentKind::Sink
            | ComponentKind::ExtractFeatures
            | ComponentKind::RemoveOutliers => Ok(first.clone()),
            ComponentKind::Mvi(_) => Ok(NodeState { line: Rc::new(first.line.map(self.imputation.matrix())), ..first.clone() }),
            ComponentKind::Fs(_) | ComponentKind::Od(_) => self.component(node, first),
            ComponentKind::Combine { op, target } => {
                if inputs.iter().any(|s| s.z != first.z || !(Rc::ptr_eq(&s.line, &first.line) || s.line == first.line)) {
                    return Err(Error::BranchConsistency { node });
                }
                let sels: Vec<&Selection> = inputs.iter().map(|s| &s.selection).collect();
                let selection = combine_states(node, op, target, &sels)?;
                let mut interval = first.interval;
                inputs.iter().for_each(|s| interval.tighten(s.interval));
                Ok(NodeState { line: first.line.clone(), z: first.z, selection, interval })
            }
        }
    }

    fn component(&mut self, node: usize, state: &NodeState) -> Result<NodeState> {
        let map = scoped(self.x.rows(), &state.selection, node)?;
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        let key = (node, map);
        if !self.cache.contains_key(&key) {
            let sub = key.1.design(&self.x);
            let prepared = match *self.graph.kind(node) {
                ComponentKind::Fs(m) => Prepared::feature_selection(m, &sub),
                ComponentKind::Od(m) => Prepared::outlier_detection(m, &sub),
                _ => unreachable!("component update on a non-component node"),
            };
            self.cache.insert(key.clone(), prepared);
        }
        let (node, map) = &key;
        let prepared = match self.cache.get_mut(&key).expect("cached") {
            Ok(p) => p,
            Err(e) => return Err(e.clone()),
        };
        let local_line = state.line.restrict(&map.rows);
        let ev = prepared.event(&local_line, state.z)?;
        let mut next = state.clone();
        next.interval.tighten(ev.interval);
        match self.graph.kind(*node) {
            ComponentKind::Fs(_) => next.selection.features = map.global_cols(&ev.selection),
            _ => {
                let found = map.global_rows(&ev.selection);
                next.selection.outliers =
                    crate::components::combine_sets(crate::graph::CombineOp::Union, &[&state.selection.outliers, &found]);
            }
        }
        Ok(next)
    }

    /// Threads the state through the graph in topological order at `z`.
    pub fn update_interval(&mut self, z: f64) -> Result<Segment> {
        let n_nodes = self.graph.nodes().len();
        let mut states: Vec<Option<NodeState>> = alloc::vec![None; n_nodes];
        let order: Vec<usize> = self.graph.topological_order().to_vec();
        for v in order {
            let preds = self.graph.predecessors(v);
            let next = if preds.is_empty() {
                NodeState {
                    line: self.line.clone(),
                    z,
                    selection: Selection { features: (0..self.x.cols()).collect(), outliers: Vec::new() },
                    interval: Interval::REAL_LINE,
                }
            } else {
                let inputs: Vec<&NodeState> = preds.iter().map(|&p| states[p].as_ref().expect("state")).collect();
                match self.apply_update_rule(v, &inputs) {
                    Ok(s) => s,
                    Err(e) if e.is_structural() => {
                        let mut interval = Interval::REAL_LINE;
                        inputs.iter().for_each(|s| interval.tighten(s.interval));
                        return Ok(Segment { interval, selection: None });
                    }
                    Err(e) => return Err(e),
                }
            };
            states[v] = Some(next);
        }
        let sink = states[self.graph.sink()].take().expect("sink state");
        Ok(Segment { interval: sink.interval, selection: Some(sink.selection) })
    }
}

/// One-shot form of [`Tracer::update_interval`].
pub fn update_interval(
    graph: &PipelineGraph,
    x: &Matrix,
    missing: &[bool],
    line: ParamLine,
    z: f64,
) -> Result<Segment> {
    Tracer::new(graph, x, missing, line)?.update_interval(z)
}

/// `[−|z_obs| − 10 σ_T, |z_obs| + 10 σ_T]`.
pub fn search_window(z_obs: f64, sigma_t: f64) -> Interval {
    let half = crate::math::abs(z_obs) + 10.0 * sigma_t;
    Interval { lo: -half, hi: half }
}

/// Step taken past a segment end.
pub fn advance_step(u: f64) -> f64 {
    1e-10f64.max(1e-10 * crate::math::abs(u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub set: IntervalSet,
    pub segments: usize,
}

/// Sweeps `window` from left to right. `segment(z)` returns the constancy
/// interval at `z` and whether it belongs to the target set.
pub fn sweep(window: Interval, mut segment: impl FnMut(f64) -> Result<(Interval, bool)>) -> Result<Sweep> {
    let mut parts: Vec<Interval> = Vec::new();
    let mut z = window.lo;
    let mut segments = 0;
    let mut prev_matched = false;
    loop {
        if segments >= MAX_SEGMENTS {
            return Err(Error::SearchStall { z, segments });
        }
        let (iv, matched) = segment(z)?;
        segments += 1;
        if !(iv.lo <= z && z <= iv.hi) {
            return Err(Error::SearchStall { z, segments });
        }
        let hi = iv.hi.min(window.hi);
        if matched {
            match parts.last_mut() {
                // adjacent matching segments: close the step gap between them
                Some(last) if prev_matched => last.hi = hi,
                _ => parts.push(Interval { lo: iv.lo.max(window.lo), hi }),
            }
        }
        prev_matched = matched;
        if iv.hi >= window.hi {
            break;
        }
        z = iv.hi + advance_step(iv.hi);
        if z > window.hi {
            break;
        }
    }
    Ok(Sweep { set: IntervalSet::from_parts(parts), segments })
}

/// Union of the constancy intervals in `window` whose selection equals `target`.
pub fn line_search_truncation(tracer: &mut Tracer<'_>, target: &Selection, window: Interval) -> Result<Sweep> {
    sweep(window, |z| {
        let seg = tracer.update_interval(z)?;
        Ok((seg.interval, seg.selection.as_ref() == Some(target)))
    })
}
