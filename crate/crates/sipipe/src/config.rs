//! JSON formats for pipelines and candidate sets.
//!
//! ```json
//! {"nodes": [{"id": 0, "kind": "source"},
//!            {"id": 1, "kind": "fs", "method": "lasso", "param": 0.08},
//!            {"id": 2, "kind": "sink"}],
//!  "edges": [[0, 1], [1, 2]]}
//! ```
//!
//! Combine nodes take `"method": "union" | "intersection"` and an optional
//! `"target": "features" | "outliers"` (default features).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Number;
use sipipe_core::cv::{CandidateSet, Folds};
use sipipe_core::{CombineOp, CombineTarget, ComponentKind, FsMethod, MviMethod, OdMethod, PipelineGraph};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeConfig {
    id: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    nodes: Vec<NodeConfig>,
    edges: Vec<[usize; 2]>,
}

fn schema(msg: String) -> AppError {
    AppError::Schema(msg)
}

impl NodeConfig {
    fn method(&self) -> AppResult<&str> {
        self.method.as_deref().ok_or_else(|| schema(format!("node {}: {} node needs a method", self.id, self.kind)))
    }

    fn real(&self) -> AppResult<f64> {
        self.param
            .as_ref()
            .and_then(Number::as_f64)
            .ok_or_else(|| schema(format!("node {}: missing numeric param", self.id)))
    }

    fn count(&self) -> AppResult<usize> {
        let v = self.real()?;
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(schema(format!("node {}: param must be a positive integer, got {v}", self.id)));
        }
        Ok(v as usize)
    }

    fn expect_bare(&self, kind: ComponentKind) -> AppResult<ComponentKind> {
        if self.method.is_some() || self.param.is_some() || self.target.is_some() {
            return Err(schema(format!("node {}: {} node takes no method, param or target", self.id, self.kind)));
        }
        Ok(kind)
    }

    fn to_kind(&self) -> AppResult<ComponentKind> {
        let unknown = |m: &str| schema(format!("node {}: unknown {} method {m:?}", self.id, self.kind));
        if self.target.is_some() && self.kind != "combine" {
            return Err(schema(format!("node {}: only combine nodes take a target", self.id)));
        }
        let kind = match self.kind.as_str() {
            "source" => return self.expect_bare(ComponentKind::Source),
            "sink" => return self.expect_bare(ComponentKind::Sink),
            "extract_features" => return self.expect_bare(ComponentKind::ExtractFeatures),
            "remove_outliers" => return self.expect_bare(ComponentKind::RemoveOutliers),
            "mvi" => ComponentKind::Mvi(match self.method()? {
                "mean" => MviMethod::Mean,
                "knn" => MviMethod::Knn,
                "regression" => MviMethod::Regression,
                m => return Err(unknown(m)),
            }),
            "od" => ComponentKind::Od(match self.method()? {
                "cook" => OdMethod::Cook { threshold: self.real()? },
                "dffits" => OdMethod::Dffits { threshold: self.real()? },
                "soft_ipod" => OdMethod::SoftIpod { lambda: self.real()? },
                m => return Err(unknown(m)),
            }),
            "fs" => ComponentKind::Fs(match self.method()? {
                "marginal" => FsMethod::Marginal { k: self.count()? },
                "stepwise" => FsMethod::Stepwise { k: self.count()? },
                "lasso" => FsMethod::Lasso { lambda: self.real()? },
                m => return Err(unknown(m)),
            }),
            "combine" => {
                let op = match self.method()? {
                    "union" => CombineOp::Union,
                    "intersection" => CombineOp::Intersection,
                    m => return Err(unknown(m)),
                };
                let target = match self.target.as_deref() {
                    None | Some("features") => CombineTarget::Features,
                    Some("outliers") => CombineTarget::Outliers,
                    Some(t) => return Err(schema(format!("node {}: unknown combine target {t:?}", self.id))),
                };
                if self.param.is_some() {
                    return Err(schema(format!("node {}: combine nodes take no param", self.id)));
                }
                return Ok(ComponentKind::Combine { op, target });
            }
            k => return Err(schema(format!("node {}: unknown node kind {k:?}", self.id))),
        };
        if matches!(kind, ComponentKind::Mvi(_)) && self.param.is_some() {
            return Err(schema(format!("node {}: mvi nodes take no param", self.id)));
        }
        Ok(kind)
    }

    fn from_kind(id: usize, kind: &ComponentKind) -> NodeConfig {
        let real = |v: f64| Number::from_f64(v);
        let count = |k: usize| Some(Number::from(k as u64));
        let (kind, method, param, target): (&str, Option<&str>, Option<Number>, Option<&str>) = match *kind {
            ComponentKind::Source => ("source", None, None, None),
            ComponentKind::Sink => ("sink", None, None, None),
            ComponentKind::ExtractFeatures => ("extract_features", None, None, None),
            ComponentKind::RemoveOutliers => ("remove_outliers", None, None, None),
            ComponentKind::Mvi(m) => {
                let name = match m {
                    MviMethod::Mean => "mean",
                    MviMethod::Knn => "knn",
                    MviMethod::Regression => "regression",
                };
                ("mvi", Some(name), None, None)
            }
            ComponentKind::Od(m) => match m {
                OdMethod::Cook { threshold } => ("od", Some("cook"), real(threshold), None),
                OdMethod::Dffits { threshold } => ("od", Some("dffits"), real(threshold), None),
                OdMethod::SoftIpod { lambda } => ("od", Some("soft_ipod"), real(lambda), None),
            },
            ComponentKind::Fs(m) => match m {
                FsMethod::Marginal { k } => ("fs", Some("marginal"), count(k), None),
                FsMethod::Stepwise { k } => ("fs", Some("stepwise"), count(k), None),
                FsMethod::Lasso { lambda } => ("fs", Some("lasso"), real(lambda), None),
            },
            ComponentKind::Combine { op, target } => {
                let op = match op {
                    CombineOp::Union => "union",
                    CombineOp::Intersection => "intersection",
                };
                let target = match target {
                    CombineTarget::Features => "features",
                    CombineTarget::Outliers => "outliers",
                };
                ("combine", Some(op), None, Some(target))
            }
        };
        NodeConfig {
            id,
            kind: kind.to_string(),
            method: method.map(str::to_string),
            param,
            target: target.map(str::to_string),
        }
    }
}

impl PipelineConfig {
    fn build(&self) -> AppResult<PipelineGraph> {
        let mut kinds = Vec::with_capacity(self.nodes.len());
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(schema(format!("node ids must be 0, 1, 2, ... in order; found {} at position {pos}", node.id)));
            }
            kinds.push(node.to_kind()?);
        }
        let edges = self.edges.iter().map(|e| (e[0], e[1])).collect();
        Ok(PipelineGraph::new(kinds, edges)?)
    }

    fn of(graph: &PipelineGraph) -> PipelineConfig {
        PipelineConfig {
            nodes: graph.nodes().iter().map(|n| NodeConfig::from_kind(n.id, &n.kind)).collect(),
            edges: graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

pub fn parse_pipeline(text: &str) -> AppResult<PipelineGraph> {
    serde_json::from_str::<PipelineConfig>(text)?.build()
}

pub fn pipeline_from_value(value: serde_json::Value) -> AppResult<PipelineGraph> {
    serde_json::from_value::<PipelineConfig>(value)?.build()
}

pub fn pipeline_to_value(graph: &PipelineGraph) -> serde_json::Value {
    serde_json::to_value(PipelineConfig::of(graph)).expect("pipeline config serializes")
}

pub fn serialize_pipeline(graph: &PipelineGraph) -> String {
    serde_json::to_string_pretty(&PipelineConfig::of(graph)).expect("pipeline config serializes")
}

pub const DEFAULT_FOLDS: usize = 2;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CandidateConfigFile {
    candidates: Vec<PipelineConfig>,
    #[serde(default = "default_folds")]
    folds: usize,
    #[serde(default)]
    seed: u64,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

/// Candidate pipelines plus the fold layout used to choose among them.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateConfig {
    pub pipelines: Vec<PipelineGraph>,
    pub folds: usize,
    pub seed: u64,
}

impl CandidateConfig {
    /// Contiguous folds over a seeded shuffle of the `n` rows.
    pub fn candidate_set(&self, n: usize) -> AppResult<CandidateSet> {
        Ok(CandidateSet { pipelines: self.pipelines.clone(), folds: shuffled_folds(n, self.folds, self.seed)? })
    }
}

pub fn shuffled_folds(n: usize, k: usize, seed: u64) -> AppResult<Folds> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Folds::from_permutation(&perm, k)?)
}

pub fn parse_candidates(text: &str) -> AppResult<CandidateConfig> {
    let file: CandidateConfigFile = serde_json::from_str(text)?;
    if file.candidates.is_empty() {
        return Err(schema("candidate list is empty".to_string()));
    }
    let pipelines = file.candidates.iter().map(PipelineConfig::build).collect::<AppResult<Vec<_>>>()?;
    Ok(CandidateConfig { pipelines, folds: file.folds, seed: file.seed })
}

pub fn serialize_candidates(config: &CandidateConfig) -> String {
    let file = CandidateConfigFile {
        candidates: config.pipelines.iter().map(PipelineConfig::of).collect(),
        folds: config.folds,
        seed: config.seed,
    };
    serde_json::to_string_pretty(&file).expect("candidate config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use sipipe_core::graph::{example_op1, example_op2};

    #[test]
    fn fixtures_round_trip() {
        for g in [example_op1(), example_op2()] {
            let text = serialize_pipeline(&g);
            assert_eq!(parse_pipeline(&text).unwrap(), g);
        }
    }

    #[test]
    fn integer_params_serialize_as_integers() {
        let text = serialize_pipeline(&example_op1());
        assert!(text.contains("\"param\": 5\n"), "{text}");
        let first = text.find("\"id\"").unwrap();
        assert!(first < text.find("\"kind\"").unwrap());
    }

    #[test]
    fn rejects_fractional_k() {
        let text = r#"{"nodes":[{"id":0,"kind":"source"},{"id":1,"kind":"fs","method":"marginal","param":2.5},
            {"id":2,"kind":"sink"}],"edges":[[0,1],[1,2]]}"#;
        assert!(matches!(parse_pipeline(text), Err(AppError::Schema(_))));
    }
}
