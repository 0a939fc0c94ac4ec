#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sipipe_core::{MaskedDataset, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Gaussian design, response `Xβ + ε`, each response masked with probability `p_missing`.
pub fn synthetic(rng: &mut ChaCha8Rng, n: usize, d: usize, beta: &[f64], p_missing: f64) -> MaskedDataset {
    let x = gaussian_matrix(rng, n, d);
    let mut y = gaussian_vec(rng, n);
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += beta.iter().enumerate().map(|(j, b)| b * x.get(i, j)).sum::<f64>();
    }
    let mut missing: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p_missing).collect();
    if missing.iter().all(|&m| m) {
        missing[0] = false;
    }
    let y_obs = y.iter().zip(&missing).filter(|(_, m)| !**m).map(|(v, _)| *v).collect();
    MaskedDataset::new(x, y_obs, missing).unwrap()
}

/// Solves `A v = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut v = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * v[k]).sum();
        v[r] = (b[r] - s) / a[r][r];
    }
    v
}

/// Least-squares coefficients of `y` on the given rows of `x` via the normal equations.
pub fn ols(x: &Matrix, rows: &[usize], y: &[f64]) -> Vec<f64> {
    let d = x.cols();
    let mut g = vec![vec![0.0; d]; d];
    let mut r = vec![0.0; d];
    for &i in rows {
        for j in 0..d {
            r[j] += x.get(i, j) * y[i];
            for k in 0..d {
                g[j][k] += x.get(i, j) * x.get(i, k);
            }
        }
    }
    solve_dense(g, r)
}

pub fn predict(x: &Matrix, i: usize, beta: &[f64]) -> f64 {
    (0..x.cols()).map(|j| x.get(i, j) * beta[j]).sum()
}
