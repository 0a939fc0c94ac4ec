use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, LeastSquares, Matrix};

/// Fixed design plus a response with explicitly missing entries.
///
/// `x` keeps all `n` rows; `y_obs` holds only the `n′` observed responses, in
/// original row order.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    x: Matrix,
    y_obs: Vec<f64>,
    missing: Vec<bool>,
}

impl MaskedDataset {
    pub fn new(x: Matrix, y_obs: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if missing.len() != x.rows() {
            return Err(Error::Dimension(alloc::format!(
                "mask has {} entries but the design has {} rows",
                missing.len(),
                x.rows()
            )));
        }
        let observed = missing.iter().filter(|m| !**m).count();
        if observed != y_obs.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} observed rows but {} responses",
                observed,
                y_obs.len()
            )));
        }
        if x.cols() == 0 {
            return Err(Error::EmptyData("design has no feature columns"));
        }
        if observed == 0 {
            return Err(Error::EmptyData("no observed responses"));
        }
        if !x.as_slice().iter().all(|v| v.is_finite()) || !y_obs.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains non-finite values".into()));
        }
        Ok(MaskedDataset { x, y_obs, missing })
    }

    /// A dataset without missing responses.
    pub fn complete(x: Matrix, y: Vec<f64>) -> Result<Self> {
        let n = x.rows();
        MaskedDataset::new(x, y, alloc::vec![false; n])
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y_obs(&self) -> &[f64] {
        &self.y_obs
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn n_observed(&self) -> usize {
        self.y_obs.len()
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.missing[i]).collect()
    }

    /// Same design and mask with a different observed response.
    pub fn with_response(&self, y_obs: Vec<f64>) -> Result<Self> {
        MaskedDataset::new(self.x.clone(), y_obs, self.missing.clone())
    }

    /// Design restricted to observed rows, paired with `y_obs`.
    pub fn observed_part(&self) -> (Matrix, &[f64]) {
        (self.x.select_rows(&self.observed_rows()), &self.y_obs)
    }
}

/// Gaussian noise model `Y = μ(X) + ε`, `ε ~ N(0, σ² I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    sigma: f64,
}

impl GaussianModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Unbiased noise variance `‖y − X(XᵀX)⁻¹Xᵀy‖² / (n − d)` of a full OLS fit.
pub fn estimate_variance(x: &Matrix, y: &[f64]) -> Result<f64> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension(alloc::format!("{} responses for {} rows", y.len(), n)));
    }
    if n <= d {
        return Err(Error::DegreesOfFreedom { n, d });
    }
    let ls = LeastSquares::new(x.clone(), "variance estimate")?;
    Ok(norm_sq(&ls.residuals(y)) / (n - d) as f64)
}
