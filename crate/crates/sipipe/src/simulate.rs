//! Monte Carlo calibration and power experiments on synthetic data.
//!
//! Each trial draws `X_ij ~ N(0, 1)` and `y = Xβ + ε` with `ε ~ N(0, I)`,
//! where `β = 0` in null mode and `β = (Δ, Δ, Δ, 0, …)` in power mode. Every
//! response is then masked with probability 0.03 and one feature, drawn
//! uniformly from the selected set, is tested. In power mode the draw is
//! restricted to the selected signal features and trials selecting none of
//! them are not counted.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sipipe_core::cv::test_features_cv_with;
use sipipe_core::inference::test_features_with;
use sipipe_core::{GaussianModel, MaskedDataset, Matrix};

use crate::error::{AppError, AppResult};
use crate::infer::{resolve_sigma, Method, Sigma, SCHEMA_VERSION};

pub const MISSING_PROBABILITY: f64 = 0.03;
pub const SIGNAL_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Null,
    Power,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub jobs: usize,
    pub sigma: Sigma,
    pub method: Method,
}

/// Outcome of one trial. `p` is `None` when nothing was tested.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub p: Option<PValues>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValues {
    pub feature: usize,
    pub selective: f64,
    pub naive: f64,
    pub oc: f64,
    pub segments: usize,
}

/// The RNG of trial `trial`: stream `trial` of the generator keyed by `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Synthetic dataset of one trial.
pub fn generate(rng: &mut impl Rng, mode: Mode, n: usize, d: usize, delta: f64) -> AppResult<MaskedDataset> {
    let x = Matrix::from_fn(n, d, |_, _| StandardNormal.sample(rng));
    let beta: Vec<f64> = (0..d)
        .map(|j| if mode == Mode::Power && j < SIGNAL_FEATURES { delta } else { 0.0 })
        .collect();
    let mean = x.matvec(&beta);
    let mut y_obs = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for mu in mean {
        let eps: f64 = StandardNormal.sample(rng);
        let masked = rng.random_bool(MISSING_PROBABILITY);
        missing.push(masked);
        if !masked {
            y_obs.push(mu + eps);
        }
    }
    Ok(MaskedDataset::new(x, y_obs, missing)?)
}

pub fn run_trial(config: &SimConfig, trial: usize) -> Trial {
    let start = Instant::now();
    let outcome = trial_inner(config, trial);
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(p) => Trial { p, error: None, seconds },
        Err(e) => Trial { p: None, error: Some(error_class(&e)), seconds },
    }
}

fn trial_inner(config: &SimConfig, trial: usize) -> AppResult<Option<PValues>> {
    let mut rng = trial_rng(config.seed, trial);
    let data = generate(&mut rng, config.mode, config.n, config.d, config.delta)?;
    let model = GaussianModel::new(resolve_sigma(config.sigma, &data)?)?;
    let mode = config.mode;
    let choose = |m: &[usize]| -> Vec<usize> {
        let pool: Vec<usize> =
            m.iter().copied().filter(|&j| mode == Mode::Null || j < SIGNAL_FEATURES).collect();
        if pool.is_empty() {
            return Vec::new();
        }
        vec![pool[rng.random_range(0..pool.len())]]
    };
    let results = match &config.method {
        Method::Pipeline(g) => test_features_with(g, &data, &model, choose)?,
        Method::Cv(cfg) => test_features_cv_with(&cfg.candidate_set(config.n)?, &data, &model, choose)?.1,
    };
    Ok(results.first().map(|r| PValues {
        feature: r.feature,
        selective: r.p_selective,
        naive: r.p_naive,
        oc: r.p_oc,
        segments: r.segments_visited,
    }))
}

/// Stable label for tallying failed trials.
fn error_class(e: &AppError) -> String {
    let text = e.to_string();
    match e {
        AppError::Core(sipipe_core::Error::Feature { source, .. }) => first_words(&source.to_string()),
        _ => first_words(&text),
    }
}

fn first_words(s: &str) -> String {
    s.split(|c: char| c.is_ascii_digit() || c == ':' || c == '(').next().unwrap_or(s).trim().to_string()
}

/// Runs all trials on a pool of `config.jobs` threads; results are in trial order.
pub fn run_trials(config: &SimConfig) -> AppResult<Vec<Trial>> {
    if config.trials == 0 || config.n == 0 || config.d == 0 {
        return Err(AppError::Usage("n, d and trials must be positive".to_string()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(AppError::Usage(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| AppError::Usage(e.to_string()))?;
    Ok(pool.install(|| (0..config.trials).into_par_iter().map(|t| run_trial(config, t)).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub selective: f64,
    pub naive: f64,
    pub oc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: String,
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Trials in which a feature was tested.
    pub tested: usize,
    pub rejection: Rates,
    pub ks_selective: f64,
    pub mean_segments: f64,
    /// Failed trials by error kind.
    pub errors: BTreeMap<String, usize>,
    /// Wall-clock seconds per trial. Omitted unless requested, since it varies between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// One-sample Kolmogorov–Smirnov distance to Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Nearest-rank quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn timing(trials: &[Trial]) -> Timing {
    let t: Vec<f64> = trials.iter().map(|t| t.seconds).collect();
    Timing { p50: quantile(&t, 0.5), p90: quantile(&t, 0.9), p99: quantile(&t, 0.99), max: quantile(&t, 1.0) }
}

pub fn summarize(config: &SimConfig, trials: &[Trial], with_timing: bool) -> SimReport {
    let ps: Vec<PValues> = trials.iter().filter_map(|t| t.p).collect();
    let tested = ps.len();
    let rate = |f: fn(&PValues) -> f64| {
        if tested == 0 {
            f64::NAN
        } else {
            ps.iter().filter(|p| f(p) <= config.alpha).count() as f64 / tested as f64
        }
    };
    let mut errors = BTreeMap::new();
    for e in trials.iter().filter_map(|t| t.error.as_ref()) {
        *errors.entry(e.clone()).or_insert(0) += 1;
    }
    let selective: Vec<f64> = ps.iter().map(|p| p.selective).collect();
    SimReport {
        schema: SCHEMA_VERSION.to_string(),
        mode: config.mode,
        n: config.n,
        d: config.d,
        trials: config.trials,
        delta: config.delta,
        alpha: config.alpha,
        seed: config.seed,
        tested,
        rejection: Rates { selective: rate(|p| p.selective), naive: rate(|p| p.naive), oc: rate(|p| p.oc) },
        ks_selective: if tested == 0 { f64::NAN } else { ks_uniform(&selective) },
        mean_segments: ps.iter().map(|p| p.segments as f64).sum::<f64>() / tested.max(1) as f64,
        errors,
        timing: with_timing.then(|| timing(trials)),
    }
}

pub fn simulate(config: &SimConfig, with_timing: bool) -> AppResult<SimReport> {
    let trials = run_trials(config)?;
    Ok(summarize(config, &trials, with_timing))
}
