//! Inference on a loaded dataset and the JSON report it produces.

use serde::{Deserialize, Serialize};
use sipipe_core::components::run_pipeline;
use sipipe_core::cv::test_features_cv;
use sipipe_core::inference::{test_features, SelectiveTestResult};
use sipipe_core::{estimate_variance, GaussianModel, MaskedDataset, PipelineGraph};

use crate::config::CandidateConfig;
use crate::data::LoadedData;
use crate::error::AppResult;

pub const SCHEMA_VERSION: &str = "1";

/// A single pipeline, or a candidate set chosen by cross-validation.
#[derive(Debug, Clone)]
pub enum Method {
    Pipeline(PipelineGraph),
    Cv(CandidateConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Known(f64),
    /// Square root of the residual variance of the full OLS fit on the observed rows.
    Estimate,
}

pub fn resolve_sigma(sigma: Sigma, dataset: &MaskedDataset) -> AppResult<f64> {
    match sigma {
        Sigma::Known(s) => Ok(s),
        Sigma::Estimate => {
            let (x_obs, y_obs) = dataset.observed_part();
            Ok(estimate_variance(&x_obs, y_obs)?.sqrt())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub id: usize,
    pub name: String,
    pub beta_hat: f64,
    pub p_selective: f64,
    pub p_naive: f64,
    pub p_oc: f64,
    pub n_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferReport {
    pub schema: String,
    pub features: Vec<FeatureReport>,
    pub outliers: Vec<usize>,
    pub sigma_used: f64,
    /// Index of the candidate chosen by cross-validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<usize>,
}

/// Results of one inference run before naming.
#[derive(Debug, Clone)]
pub struct Inference {
    pub candidate: Option<usize>,
    pub outliers: Vec<usize>,
    pub sigma: f64,
    pub results: Vec<SelectiveTestResult>,
}

pub fn run_inference(dataset: &MaskedDataset, method: &Method, sigma: Sigma) -> AppResult<Inference> {
    let sigma = resolve_sigma(sigma, dataset)?;
    let model = GaussianModel::new(sigma)?;
    let (candidate, graph, results) = match method {
        Method::Pipeline(g) => (None, g.clone(), test_features(g, dataset, &model)?),
        Method::Cv(cfg) => {
            let set = cfg.candidate_set(dataset.n())?;
            let (s, results) = test_features_cv(&set, dataset, &model)?;
            (Some(s), cfg.pipelines[s].clone(), results)
        }
    };
    let outliers = run_pipeline(&graph, dataset)?.outliers;
    Ok(Inference { candidate, outliers, sigma, results })
}

pub fn infer(data: &LoadedData, method: &Method, sigma: Sigma) -> AppResult<InferReport> {
    let run = run_inference(&data.dataset, method, sigma)?;
    let features = run
        .results
        .iter()
        .map(|r| FeatureReport {
            id: r.feature,
            name: data.feature_names[r.feature].clone(),
            beta_hat: r.beta_hat,
            p_selective: r.p_selective,
            p_naive: r.p_naive,
            p_oc: r.p_oc,
            n_segments: r.segments_visited,
        })
        .collect();
    Ok(InferReport {
        schema: SCHEMA_VERSION.to_string(),
        features,
        outliers: run.outliers,
        sigma_used: run.sigma,
        candidate: run.candidate,
    })
}
