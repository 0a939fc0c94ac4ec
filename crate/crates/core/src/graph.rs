//! Pipelines as validated DAGs of typed component nodes.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MviMethod {
    Mean,
    Knn,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdMethod {
    /// Flag rows whose Cook's distance exceeds the threshold.
    Cook { threshold: f64 },
    /// Flag rows with `DFFITS² > threshold · d / (n − d)`.
    Dffits { threshold: f64 },
    /// L1-penalised mean-shift model; flag rows with a nonzero shift.
    SoftIpod { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FsMethod {
    Marginal { k: usize },
    Stepwise { k: usize },
    Lasso { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Union,
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineTarget {
    Features,
    Outliers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentKind {
    Source,
    Sink,
    Mvi(MviMethod),
    Od(OdMethod),
    Fs(FsMethod),
    Combine { op: CombineOp, target: CombineTarget },
    /// Marks that later nodes see only the selected columns. Carries no event.
    ExtractFeatures,
    /// Marks that later nodes see only the non-outlier rows. Carries no event.
    RemoveOutliers,
}

impl ComponentKind {
    fn check_params(&self, id: usize) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Graph(format!("node {id}: {what} must be positive and finite, got {v}")))
            }
        };
        match *self {
            ComponentKind::Od(OdMethod::Cook { threshold }) | ComponentKind::Od(OdMethod::Dffits { threshold }) => {
                positive(threshold, "threshold")
            }
            ComponentKind::Od(OdMethod::SoftIpod { lambda }) | ComponentKind::Fs(FsMethod::Lasso { lambda }) => {
                positive(lambda, "lambda")
            }
            ComponentKind::Fs(FsMethod::Marginal { k }) | ComponentKind::Fs(FsMethod::Stepwise { k }) if k == 0 => {
                Err(Error::Graph(format!("node {id}: k must be at least 1")))
            }
            _ => Ok(()),
        }
    }

    fn is_combine(&self) -> bool {
        matches!(self, ComponentKind::Combine { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub kind: ComponentKind,
}

/// A validated pipeline DAG with a unique source and sink.
///
/// Node ids are the positions in `nodes`; every ordering decision made on the
/// graph breaks ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGraph {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    order: Vec<usize>,
    source: usize,
    sink: usize,
}

impl PipelineGraph {
    pub fn new(kinds: Vec<ComponentKind>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = kinds.len();
        for (id, k) in kinds.iter().enumerate() {
            k.check_params(id)?;
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(from, to) in &edges {
            if from >= n || to >= n {
                return Err(Error::Graph(format!("edge {from} -> {to} references an unknown node")));
            }
            if from == to {
                return Err(Error::Cycle { from, to });
            }
            if succs[from].contains(&to) {
                return Err(Error::Graph(format!("duplicate edge {from} -> {to}")));
            }
            succs[from].push(to);
            preds[to].push(from);
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
        }

        let find_unique = |want: fn(&ComponentKind) -> bool, name: &str| -> Result<usize> {
            let found: Vec<usize> = (0..n).filter(|&i| want(&kinds[i])).collect();
            match found.as_slice() {
                [one] => Ok(*one),
                [] => Err(Error::Graph(format!("pipeline has no {name} node"))),
                _ => Err(Error::Graph(format!("pipeline has {} {name} nodes", found.len()))),
            }
        };
        let source = find_unique(|k| matches!(k, ComponentKind::Source), "source")?;
        let sink = find_unique(|k| matches!(k, ComponentKind::Sink), "sink")?;

        if let Some((from, to)) = find_back_edge(&succs) {
            return Err(Error::Cycle { from, to });
        }

        for id in 0..n {
            let indeg = preds[id].len();
            let ok = match kinds[id] {
                ComponentKind::Source => indeg == 0,
                ComponentKind::Combine { .. } => indeg >= 2,
                _ => indeg == 1,
            };
            if !ok {
                return Err(Error::Graph(format!("node {id} has in-degree {indeg}, which its kind does not allow")));
            }
        }
        if !succs[sink].is_empty() {
            return Err(Error::Graph("the sink node has outgoing edges".into()));
        }

        let forward = reachable(source, &succs);
        let backward = reachable(sink, &preds);
        if let Some(id) = (0..n).find(|&i| !forward[i] || !backward[i]) {
            return Err(Error::Graph(format!("node {id} does not lie on a source-to-sink path")));
        }

        let mvi: Vec<usize> = (0..n).filter(|&i| matches!(kinds[i], ComponentKind::Mvi(_))).collect();
        match mvi.as_slice() {
            [] => {}
            [m] => {
                if succs[source].as_slice() != [*m] {
                    return Err(Error::Placement(format!(
                        "imputation node {m} must directly follow the source on every path"
                    )));
                }
            }
            _ => return Err(Error::Placement(format!("{} imputation nodes; at most one is allowed", mvi.len()))),
        }

        let order = topo_sort(&preds, &succs);
        let nodes: Vec<Node> = kinds.into_iter().enumerate().map(|(id, kind)| Node { id, kind }).collect();
        check_branch_consistency(&nodes, &preds, &order)?;

        Ok(PipelineGraph { nodes, edges, preds, succs, order, source, sink })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self, id: usize) -> &ComponentKind {
        &self.nodes[id].kind
    }

    pub fn predecessors(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn successors(&self, id: usize) -> &[usize] {
        &self.succs[id]
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Topological order, ties broken by ascending node id.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn imputation(&self) -> Option<MviMethod> {
        self.nodes.iter().find_map(|n| match n.kind {
            ComponentKind::Mvi(m) => Some(m),
            _ => None,
        })
    }

    /// True when no node's output depends on the response.
    pub fn is_data_independent(&self) -> bool {
        self.nodes.iter().all(|n| !matches!(n.kind, ComponentKind::Od(_) | ComponentKind::Fs(_)))
    }
}

fn find_back_edge(succs: &[Vec<usize>]) -> Option<(usize, usize)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = succs.len();
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // explicit stack of (node, next successor index)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = succs[v].get(*next) {
                *next += 1;
                match mark[w] {
                    Mark::Active => return Some((v, w)),
                    Mark::New => {
                        mark[w] = Mark::Active;
                        stack.push((w, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn reachable(start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

fn topo_sort(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Vec<usize> {
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..preds.len()).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(preds.len());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succs[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    order
}

// A combine node merges one kind of set; the other set must be identical on all
// incoming branches, so nodes that could change it may only sit upstream of
// the point where the branches split.
fn check_branch_consistency(nodes: &[Node], preds: &[Vec<usize>], order: &[usize]) -> Result<()> {
    let n = nodes.len();
    let mut ancestors: Vec<Vec<bool>> = vec![Vec::new(); n];
    for &v in order {
        let mut anc = vec![false; n];
        for &p in &preds[v] {
            anc[p] = true;
            for (a, &pa) in anc.iter_mut().zip(&ancestors[p]) {
                *a |= pa;
            }
        }
        ancestors[v] = anc;
    }
    for node in nodes {
        let ComponentKind::Combine { target, .. } = node.kind else { continue };
        let scopes: Vec<Vec<bool>> = preds[node.id]
            .iter()
            .map(|&p| {
                let mut s = ancestors[p].clone();
                s[p] = true;
                s
            })
            .collect();
        for u in 0..n {
            let count = scopes.iter().filter(|s| s[u]).count();
            if count == 0 || count == scopes.len() {
                continue;
            }
            let conflicting = match (target, nodes[u].kind) {
                (_, ComponentKind::Mvi(_)) => true,
                (CombineTarget::Features, ComponentKind::Od(_)) => true,
                (CombineTarget::Outliers, ComponentKind::Fs(_)) => true,
                (CombineTarget::Features, ComponentKind::Combine { target: CombineTarget::Outliers, .. }) => true,
                (CombineTarget::Outliers, ComponentKind::Combine { target: CombineTarget::Features, .. }) => true,
                _ => false,
            };
            if conflicting {
                return Err(Error::Graph(format!(
                    "node {u} on a single branch into combine node {} changes the set it does not merge",
                    node.id
                )));
            }
        }
        debug_assert!(node.kind.is_combine());
    }
    Ok(())
}

/// Reference pipeline used as a fixture
/// throughout the tests: mean imputation, soft-IPOD, marginal screening, then
/// stepwise and lasso merged by union.
pub fn example_op1() -> PipelineGraph {
    op1_with(0.02, 5, 3, 0.08)
}

pub fn op1_with(ipod_lambda: f64, marginal_k: usize, stepwise_k: usize, lasso_lambda: f64) -> PipelineGraph {
    use ComponentKind::*;
    PipelineGraph::new(
        vec![
            Source,
            Mvi(MviMethod::Mean),
            Od(OdMethod::SoftIpod { lambda: ipod_lambda }),
            Fs(FsMethod::Marginal { k: marginal_k }),
            Fs(FsMethod::Stepwise { k: stepwise_k }),
            Fs(FsMethod::Lasso { lambda: lasso_lambda }),
            Combine { op: CombineOp::Union, target: CombineTarget::Features },
            Sink,
        ],
        vec![(0, 1), (1, 2), (2, 3), (3, 4), (3, 5), (4, 6), (5, 6), (6, 7)],
    )
    .expect("op1 is a valid pipeline")
}

/// Regression imputation, marginal screening, Cook's distance, then stepwise
/// and lasso merged by intersection.
pub fn example_op2() -> PipelineGraph {
    op2_with(5, 3.0, 3, 0.08)
}

pub fn op2_with(marginal_k: usize, cook_threshold: f64, stepwise_k: usize, lasso_lambda: f64) -> PipelineGraph {
    use ComponentKind::*;
    PipelineGraph::new(
        vec![
            Source,
            Mvi(MviMethod::Regression),
            Fs(FsMethod::Marginal { k: marginal_k }),
            Od(OdMethod::Cook { threshold: cook_threshold }),
            Fs(FsMethod::Stepwise { k: stepwise_k }),
            Fs(FsMethod::Lasso { lambda: lasso_lambda }),
            Combine { op: CombineOp::Intersection, target: CombineTarget::Features },
            Sink,
        ],
        vec![(0, 1), (1, 2), (2, 3), (3, 4), (3, 5), (4, 6), (5, 6), (6, 7)],
    )
    .expect("op2 is a valid pipeline")
}
