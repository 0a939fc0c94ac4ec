use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::MviMethod;
use crate::linalg::{norm_sq, sub, LeastSquares, Matrix};

/// Linear imputation `y⁺ = D y_obs` with `D` of shape `n × n′`.
///
/// `D` depends on the design and the missing mask only. Rows of observed
/// entries are unit rows, so observed values pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationMap {
    method: Option<MviMethod>,
    d: Matrix,
}

impl ImputationMap {
    pub fn identity(n: usize) -> Self {
        ImputationMap { method: None, d: Matrix::identity(n) }
    }

    pub fn method(&self) -> Option<MviMethod> {
        self.method
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    pub fn apply(&self, y_obs: &[f64]) -> Vec<f64> {
        self.d.matvec(y_obs)
    }

    /// `Dᵀ v`, mapping a functional on the imputed frame back to the observed one.
    pub fn pull_back(&self, v: &[f64]) -> Vec<f64> {
        self.d.tr_matvec(v)
    }
}

pub fn build_imputation_map(method: MviMethod, x: &Matrix, missing: &[bool]) -> Result<ImputationMap> {
    let n = x.rows();
    if missing.len() != n {
        return Err(Error::Dimension(alloc::format!("mask of length {} for {} rows", missing.len(), n)));
    }
    let observed: Vec<usize> = (0..n).filter(|&i| !missing[i]).collect();
    let n_obs = observed.len();
    if n_obs == 0 {
        return Err(Error::EmptyData("no observed responses to impute from"));
    }
    let mut d = Matrix::zeros(n, n_obs);
    for (k, &i) in observed.iter().enumerate() {
        d.set(i, k, 1.0);
    }
    if n_obs == n {
        return Ok(ImputationMap { method: Some(method), d });
    }
    let missing_rows = (0..n).filter(|&i| missing[i]);
    match method {
        MviMethod::Mean => {
            let w = 1.0 / n_obs as f64;
            for i in missing_rows {
                d.row_mut(i).iter_mut().for_each(|v| *v = w);
            }
        }
        MviMethod::Knn => {
            for i in missing_rows {
                let xi = x.row(i);
                let mut best = (f64::INFINITY, 0usize);
                for (k, &j) in observed.iter().enumerate() {
                    let dist = norm_sq(&sub(xi, x.row(j)));
                    if dist < best.0 {
                        best = (dist, k);
                    }
                }
                d.set(i, best.1, 1.0);
            }
        }
        MviMethod::Regression => {
            let d_cols = x.cols();
            if n_obs <= d_cols {
                return Err(Error::DegreesOfFreedom { n: n_obs, d: d_cols });
            }
            let ls = LeastSquares::new(x.select_rows(&observed), "regression imputation")?;
            let coef_map = ls.coefficient_map();
            for i in missing_rows {
                let row = coef_map.tr_matvec(x.row(i));
                d.row_mut(i).copy_from_slice(&row);
            }
        }
    }
    Ok(ImputationMap { method: Some(method), d })
}
