//! Cyclic coordinate descent for `min (1/2n)‖y − Xβ‖² + λ‖β‖₁`.
//!
//! Coordinates are visited in ascending order every sweep, so the result is a
//! deterministic function of `(X, y, λ, warm start)`. After convergence the
//! active set is re-solved exactly from its stationarity equations, which pins
//! the coefficients to the closed form the selection event is built from.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Cholesky, Matrix};
use crate::math;

pub const MAX_SWEEPS: usize = 100_000;
pub const KKT_TOLERANCE: f64 = 1e-10;
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

impl LassoFit {
    /// Indices with `|β_j| > SUPPORT_THRESHOLD`, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coef.len()).filter(|&j| math::abs(self.coef[j]) > SUPPORT_THRESHOLD).collect()
    }

    pub fn signs(&self, support: &[usize]) -> Vec<f64> {
        support.iter().map(|&j| if self.coef[j] > 0.0 { 1.0 } else { -1.0 }).collect()
    }
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Column-major copy of the design plus squared column norms, reused across solves.
#[derive(Debug, Clone)]
pub struct LassoDesign {
    n: usize,
    p: usize,
    columns: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl LassoDesign {
    pub fn new(x: &Matrix) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let mut columns = vec![0.0; n * p];
        for i in 0..n {
            for (j, &v) in x.row(i).iter().enumerate() {
                columns[j * n + i] = v;
            }
        }
        let sq_norms = (0..p).map(|j| {
            let c = &columns[j * n..(j + 1) * n];
            dot(c, c)
        });
        LassoDesign { n, p, sq_norms: sq_norms.collect(), columns }
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    fn kkt_residual(&self, coef: &[f64], resid: &[f64], lambda: f64) -> f64 {
        let nf = self.n as f64;
        (0..self.p)
            .map(|j| {
                let g = dot(self.column(j), resid) / nf;
                if coef[j] > 0.0 {
                    math::abs(g - lambda)
                } else if coef[j] < 0.0 {
                    math::abs(g + lambda)
                } else {
                    (math::abs(g) - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Coordinate descent from `warm` (or zero), then an exact re-solve on the active set.
    pub fn solve(&self, y: &[f64], lambda: f64, warm: Option<&[f64]>) -> Result<LassoFit> {
        let (n, p) = (self.n, self.p);
        let nf = n as f64;
        let mut coef = match warm {
            Some(w) if w.len() == p => w.to_vec(),
            _ => vec![0.0; p],
        };
        let mut resid = y.to_vec();
        for j in 0..p {
            if coef[j] != 0.0 {
                axpy(-coef[j], self.column(j), &mut resid);
            }
        }
        let y_scale = 1f64.max(math::max_abs(y));
        let mut sweeps = 0;
        let mut kkt = f64::INFINITY;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut max_delta = 0.0f64;
            for j in 0..p {
                let sq = self.sq_norms[j];
                if sq == 0.0 {
                    continue;
                }
                let col = self.column(j);
                let old = coef[j];
                let rho = dot(col, &resid) / nf + old * sq / nf;
                let new = soft_threshold(rho, lambda) / (sq / nf);
                if new != old {
                    axpy(old - new, col, &mut resid);
                    coef[j] = new;
                    max_delta = max_delta.max(math::abs(new - old) * math::sqrt(sq));
                }
            }
            if max_delta <= 1e-12 * y_scale {
                kkt = self.kkt_residual(&coef, &resid, lambda);
                if kkt <= KKT_TOLERANCE {
                    break;
                }
            }
        }
        if kkt > KKT_TOLERANCE {
            kkt = self.kkt_residual(&coef, &resid, lambda);
            if kkt > KKT_TOLERANCE {
                return Err(Error::SolverDiverged { kkt_residual: kkt });
            }
        }
        self.polish(y, lambda, &mut coef);
        let resid = self.residual(y, &coef);
        let kkt_residual = self.kkt_residual(&coef, &resid, lambda);
        Ok(LassoFit { coef, sweeps, kkt_residual })
    }

    fn residual(&self, y: &[f64], coef: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        for (j, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                axpy(-c, self.column(j), &mut r);
            }
        }
        r
    }

    // Replace the active coefficients by the solution of
    // X_Aᵀ X_A β_A = X_Aᵀ y − nλ s when that keeps the signs.
    fn polish(&self, y: &[f64], lambda: f64, coef: &mut [f64]) {
        let active: Vec<usize> = (0..self.p).filter(|&j| coef[j] != 0.0).collect();
        if active.is_empty() {
            return;
        }
        let nf = self.n as f64;
        let gram = Matrix::from_fn(active.len(), active.len(), |a, b| {
            dot(self.column(active[a]), self.column(active[b]))
        });
        let Ok(chol) = Cholesky::factor(&gram, "lasso polish") else { return };
        let rhs: Vec<f64> = active
            .iter()
            .map(|&j| dot(self.column(j), y) - nf * lambda * if coef[j] > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let exact = chol.solve(&rhs);
        let consistent = active.iter().zip(&exact).all(|(&j, &v)| v * coef[j] > 0.0);
        if consistent {
            for (&j, &v) in active.iter().zip(&exact) {
                coef[j] = v;
            }
        }
    }
}
