//! Outlier detectors on a sub-design `X_sub` with response `y_sub`.
//!
//! Cook's distance and DFFITS both reduce to a rule of the form
//! `c_i e_i² − κ ‖e‖² > 0`, where `e = (I − H) y` and the weights `c_i`, `κ`
//! depend on the design only. The event code reuses the same form.

use alloc::vec::Vec;

use crate::components::lasso::LassoDesign;
use crate::error::{Error, Result};
use crate::graph::OdMethod;
use crate::linalg::{norm_sq, LeastSquares, Matrix};

const LEVERAGE_MARGIN: f64 = 1e-10;

/// Residuals this small relative to the response are rounding noise of an exact fit.
pub const RESIDUAL_NOISE: f64 = 1e-12;

/// Design-only part of an influence rule: flag row `i` iff `c_i e_i² − κ·rss > 0`.
#[derive(Debug, Clone)]
pub struct InfluenceRule {
    pub weights: Vec<f64>,
    pub kappa: f64,
    pub residual_maker: Matrix,
}

impl InfluenceRule {
    pub fn cook(x: &Matrix, lambda: f64) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n <= d {
            return Err(Error::DegreesOfFreedom { n, d });
        }
        let (ls, h) = leverages(x, "cook's distance")?;
        let weights = h.iter().map(|&h| h / ((1.0 - h) * (1.0 - h))).collect();
        let kappa = lambda * d as f64 / (n - d) as f64;
        Ok(InfluenceRule { weights, kappa, residual_maker: ls.residual_maker() })
    }

    pub fn dffits(x: &Matrix, lambda: f64) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n < d + 2 {
            return Err(Error::DegreesOfFreedom { n, d: d + 1 });
        }
        let (ls, h) = leverages(x, "dffits")?;
        let thr = lambda * d as f64 / (n - d) as f64;
        let dof = (n - d - 1) as f64;
        // DFFITS² > thr with MSE_(i) = (rss − e_i²/(1−h)) / (n−d−1), multiplied out
        let weights = h.iter().map(|&h| h * dof / ((1.0 - h) * (1.0 - h)) + thr / (1.0 - h)).collect();
        Ok(InfluenceRule { weights, kappa: thr, residual_maker: ls.residual_maker() })
    }

    /// `(I − H) v`, zeroed when it is at rounding level relative to `v`.
    pub fn residuals(&self, v: &[f64]) -> Vec<f64> {
        let mut e = self.residual_maker.matvec(v);
        if norm_sq(&e) <= RESIDUAL_NOISE * RESIDUAL_NOISE * norm_sq(v) {
            e.iter_mut().for_each(|x| *x = 0.0);
        }
        e
    }

    pub fn flagged(&self, y: &[f64]) -> Vec<usize> {
        let e = self.residuals(y);
        let rss = norm_sq(&e);
        (0..e.len()).filter(|&i| self.weights[i] * e[i] * e[i] - self.kappa * rss > 0.0).collect()
    }
}

fn leverages(x: &Matrix, context: &'static str) -> Result<(LeastSquares, Vec<f64>)> {
    let ls = LeastSquares::new(x.clone(), context)?;
    let h = ls.leverages();
    if let Some(row) = h.iter().position(|&h| 1.0 - h <= LEVERAGE_MARGIN) {
        return Err(Error::LeverageDegenerate { row });
    }
    Ok((ls, h))
}

/// Rows with Cook's distance above `lambda`, local indices ascending.
pub fn detect_outliers_cook(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<usize>> {
    Ok(InfluenceRule::cook(x, lambda)?.flagged(y))
}

/// Rows with `DFFITS² > lambda · d / (n − d)`, local indices ascending.
pub fn detect_outliers_dffits(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<usize>> {
    Ok(InfluenceRule::dffits(x, lambda)?.flagged(y))
}

/// Mean-shift lasso reduced to `min (1/2n)‖Py − Pu‖² + λ‖u‖₁` with `P = I − H`.
#[derive(Debug, Clone)]
pub struct SoftIpod {
    pub projector: Matrix,
    pub design: LassoDesign,
}

impl SoftIpod {
    pub fn new(x: &Matrix) -> Result<Self> {
        let projector = LeastSquares::new(x.clone(), "soft-ipod")?.residual_maker();
        let design = LassoDesign::new(&projector);
        Ok(SoftIpod { projector, design })
    }

    pub fn fit(&self, y: &[f64], lambda: f64, warm: Option<&[f64]>) -> Result<super::lasso::LassoFit> {
        self.design.solve(&self.projector.matvec(y), lambda, warm)
    }
}

pub fn detect_outliers_soft_ipod(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<usize>> {
    Ok(SoftIpod::new(x)?.fit(y, lambda, None)?.support())
}

pub fn detect_outliers(method: OdMethod, x: &Matrix, y: &[f64]) -> Result<Vec<usize>> {
    match method {
        OdMethod::Cook { threshold } => detect_outliers_cook(x, y, threshold),
        OdMethod::Dffits { threshold } => detect_outliers_dffits(x, y, threshold),
        OdMethod::SoftIpod { lambda } => detect_outliers_soft_ipod(x, y, lambda),
    }
}
