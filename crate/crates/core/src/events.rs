//! Selection events along a line `y(r) = a + b r`.
//!
//! Each event runs the forward algorithm at `r = z` and returns the largest
//! interval around `z` on which a set of quadratic inequalities, sufficient for
//! that selection, keeps holding. Indices in results are local to the sub-design.

use alloc::vec::Vec;

use crate::components::lasso::{LassoDesign, LassoFit};
use crate::components::outlier::{InfluenceRule, SoftIpod};
use crate::components::selection::{normalized_columns, stepwise_path, top_k, STEPWISE_MIN_GAIN};
use crate::error::{Error, Result};
use crate::graph::{FsMethod, OdMethod};
use crate::interval::{solve_quadratic_inequality, Interval};
use crate::linalg::{dot, norm_sq, Cholesky, Matrix};
use crate::math;

/// `y(r) = a + b r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLine {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ParamLine {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(alloc::format!("line with |a| = {} and |b| = {}", a.len(), b.len())));
        }
        if !a.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("line has non-finite coefficients".into()));
        }
        Ok(ParamLine { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn at(&self, z: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + b * z).collect()
    }

    pub fn map(&self, m: &Matrix) -> ParamLine {
        ParamLine { a: m.matvec(&self.a), b: m.matvec(&self.b) }
    }

    pub fn restrict(&self, rows: &[usize]) -> ParamLine {
        ParamLine { a: rows.iter().map(|&i| self.a[i]).collect(), b: rows.iter().map(|&i| self.b[i]).collect() }
    }

    /// `wᵀy(r) = p + q r` as `(p, q)`.
    fn form(&self, w: &[f64]) -> Linear {
        Linear { p: dot(w, &self.a), q: dot(w, &self.b) }
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    p: f64,
    q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventResult {
    pub selection: Vec<usize>,
    pub interval: Interval,
}

// Running intersection of the solution intervals of `α r² + β r + γ ≤ 0`.
struct Constraints {
    z: f64,
    interval: Interval,
}

impl Constraints {
    fn new(z: f64) -> Self {
        Constraints { z, interval: Interval::REAL_LINE }
    }

    fn quadratic(&mut self, alpha: f64, beta: f64, gamma: f64) -> Result<()> {
        let iv = solve_quadratic_inequality(alpha, beta, gamma, self.z)?;
        self.interval.tighten(iv);
        Ok(())
    }

    fn linear(&mut self, f: Linear, offset: f64) -> Result<()> {
        self.quadratic(0.0, f.q, f.p + offset)
    }

    // c1 (l)² − c2 (j)² ≤ 0
    fn squares(&mut self, c1: f64, l: Linear, c2: f64, j: Linear) -> Result<()> {
        self.quadratic(
            c1 * l.q * l.q - c2 * j.q * j.q,
            2.0 * (c1 * l.p * l.q - c2 * j.p * j.q),
            c1 * l.p * l.p - c2 * j.p * j.p,
        )
    }
}

/// Design-only state of a component on a fixed sub-design, reusable across `z`.
#[derive(Debug, Clone)]
pub enum Prepared {
    Marginal { k: usize, columns: Vec<Vec<f64>> },
    Stepwise { k: usize, x: Matrix },
    Lasso { lambda: f64, design: LassoDesign, warm: Option<Vec<f64>> },
    Influence(InfluenceRule),
    SoftIpod { lambda: f64, ipod: SoftIpod, warm: Option<Vec<f64>> },
}

impl Prepared {
    pub fn feature_selection(method: FsMethod, x: &Matrix) -> Result<Self> {
        Ok(match method {
            FsMethod::Marginal { k } => Prepared::Marginal { k, columns: normalized_columns(x)? },
            FsMethod::Stepwise { k } => Prepared::Stepwise { k, x: x.clone() },
            FsMethod::Lasso { lambda } => Prepared::Lasso { lambda, design: LassoDesign::new(x), warm: None },
        })
    }

    pub fn outlier_detection(method: OdMethod, x: &Matrix) -> Result<Self> {
        Ok(match method {
            OdMethod::Cook { threshold } => Prepared::Influence(InfluenceRule::cook(x, threshold)?),
            OdMethod::Dffits { threshold } => Prepared::Influence(InfluenceRule::dffits(x, threshold)?),
            OdMethod::SoftIpod { lambda } => Prepared::SoftIpod { lambda, ipod: SoftIpod::new(x)?, warm: None },
        })
    }

    /// Selection at `z` and the interval on which it is certified constant.
    pub fn event(&mut self, line: &ParamLine, z: f64) -> Result<EventResult> {
        let y = line.at(z);
        let mut cons = Constraints::new(z);
        let selection = match self {
            Prepared::Marginal { k, columns } => marginal(columns, *k, line, &y, &mut cons)?,
            Prepared::Stepwise { k, x } => stepwise(x, *k, line, &y, &mut cons)?,
            Prepared::Lasso { lambda, design, warm } => {
                let fit = design.solve(&y, *lambda, warm.as_deref())?;
                let support = lasso_constraints(design, &fit, line, *lambda, &mut cons)?;
                *warm = Some(fit.coef);
                support
            }
            Prepared::Influence(rule) => influence(rule, line, &y, &mut cons)?,
            Prepared::SoftIpod { lambda, ipod, warm } => {
                let fit = ipod.fit(&y, *lambda, warm.as_deref())?;
                let projected = line.map(&ipod.projector);
                let support = lasso_constraints(&ipod.design, &fit, &projected, *lambda, &mut cons)?;
                *warm = Some(fit.coef);
                support
            }
        };
        Ok(EventResult { selection, interval: cons.interval })
    }
}

fn marginal(columns: &[Vec<f64>], k: usize, line: &ParamLine, y: &[f64], cons: &mut Constraints) -> Result<Vec<usize>> {
    let scores: Vec<f64> = columns.iter().map(|c| math::abs(dot(c, y))).collect();
    let selected = top_k(&scores, k);
    let forms: Vec<Linear> = columns.iter().map(|c| line.form(c)).collect();
    let mut is_sel = alloc::vec![false; columns.len()];
    selected.iter().for_each(|&j| is_sel[j] = true);
    for &j in &selected {
        for l in (0..columns.len()).filter(|&l| !is_sel[l]) {
            // (x̂_lᵀy)² − (x̂_jᵀy)² ≤ 0
            cons.squares(1.0, forms[l], 1.0, forms[j])?;
        }
    }
    Ok(selected)
}

fn stepwise(x: &Matrix, k: usize, line: &ParamLine, y: &[f64], cons: &mut Constraints) -> Result<Vec<usize>> {
    let path = stepwise_path(x, y, k);
    // ‖P₀ y(r)‖² for the null-model residual
    let u = path.null_basis.residualize(&line.a);
    let w = path.null_basis.residualize(&line.b);
    let null_rss = (norm_sq(&w), 2.0 * dot(&u, &w), norm_sq(&u));
    for step in &path.steps {
        let forms: Vec<(usize, Linear, f64)> =
            step.candidates.iter().map(|(l, xt)| (*l, line.form(xt), norm_sq(xt))).collect();
        match step.chosen {
            Some(j) => {
                let &(_, fj, nj) = forms.iter().find(|f| f.0 == j).expect("chosen candidate");
                for &(l, fl, nl) in &forms {
                    if l != j {
                        // ‖x̃_j‖² (x̃_lᵀy)² − ‖x̃_l‖² (x̃_jᵀy)² ≤ 0
                        cons.squares(nj, fl, nl, fj)?;
                    }
                }
                // the gain must clear the stopping threshold
                let t = STEPWISE_MIN_GAIN * nj;
                cons.quadratic(
                    t * null_rss.0 - fj.q * fj.q,
                    t * null_rss.1 - 2.0 * fj.p * fj.q,
                    t * null_rss.2 - fj.p * fj.p,
                )?;
            }
            None => {
                for &(_, fl, nl) in &forms {
                    let t = STEPWISE_MIN_GAIN * nl;
                    cons.quadratic(
                        fl.q * fl.q - t * null_rss.0,
                        2.0 * fl.p * fl.q - t * null_rss.1,
                        fl.p * fl.p - t * null_rss.2,
                    )?;
                }
            }
        }
    }
    Ok(path.selected())
}

// Active set and signs fixed; everything below is affine in r.
fn lasso_constraints(
    design: &LassoDesign,
    fit: &LassoFit,
    line: &ParamLine,
    lambda: f64,
    cons: &mut Constraints,
) -> Result<Vec<usize>> {
    let support = fit.support();
    let signs = fit.signs(&support);
    let nf = design.rows() as f64;
    let mut resid_a = line.a.clone();
    let mut resid_b = line.b.clone();
    if !support.is_empty() {
        let gram = Matrix::from_fn(support.len(), support.len(), |i, j| {
            dot(design.column(support[i]), design.column(support[j]))
        });
        let chol = Cholesky::factor(&gram, "lasso active set")?;
        let rhs_a: Vec<f64> =
            support.iter().zip(&signs).map(|(&j, s)| dot(design.column(j), &line.a) - nf * lambda * s).collect();
        let rhs_b: Vec<f64> = support.iter().map(|&j| dot(design.column(j), &line.b)).collect();
        let beta0 = chol.solve(&rhs_a);
        let beta1 = chol.solve(&rhs_b);
        for ((s, b0), b1) in signs.iter().zip(&beta0).zip(&beta1) {
            // s β(r) ≥ 0
            cons.quadratic(0.0, -s * b1, -s * b0)?;
        }
        for (pos, &j) in support.iter().enumerate() {
            crate::linalg::axpy(-beta0[pos], design.column(j), &mut resid_a);
            crate::linalg::axpy(-beta1[pos], design.column(j), &mut resid_b);
        }
    }
    let mut active = alloc::vec![false; design.cols()];
    support.iter().for_each(|&j| active[j] = true);
    for j in (0..design.cols()).filter(|&j| !active[j]) {
        let col = design.column(j);
        let g = Linear { p: dot(col, &resid_a) / nf, q: dot(col, &resid_b) / nf };
        cons.linear(g, -lambda)?;
        cons.linear(Linear { p: -g.p, q: -g.q }, -lambda)?;
    }
    Ok(support)
}

fn influence(rule: &InfluenceRule, line: &ParamLine, y: &[f64], cons: &mut Constraints) -> Result<Vec<usize>> {
    let flagged = rule.flagged(y);
    let e = ParamLine { a: rule.residuals(&line.a), b: rule.residuals(&line.b) };
    let rss = (norm_sq(&e.b), 2.0 * dot(&e.a, &e.b), norm_sq(&e.a));
    let mut is_flagged = alloc::vec![false; e.len()];
    flagged.iter().for_each(|&i| is_flagged[i] = true);
    let k = rule.kappa;
    for i in 0..e.len() {
        let c = rule.weights[i];
        let (p, q) = (e.a[i], e.b[i]);
        // c e_i² − κ rss, positive exactly on flagged rows
        let alpha = c * q * q - k * rss.0;
        let beta = 2.0 * c * p * q - k * rss.1;
        let gamma = c * p * p - k * rss.2;
        if is_flagged[i] {
            cons.quadratic(-alpha, -beta, -gamma)?;
        } else {
            cons.quadratic(alpha, beta, gamma)?;
        }
    }
    Ok(flagged)
}

pub fn fs_event(method: FsMethod, x_sub: &Matrix, line: &ParamLine, z: f64) -> Result<EventResult> {
    Prepared::feature_selection(method, x_sub)?.event(line, z)
}

pub fn od_event(method: OdMethod, x_sub: &Matrix, line: &ParamLine, z: f64) -> Result<EventResult> {
    Prepared::outlier_detection(method, x_sub)?.event(line, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn marginal_two_features() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let line = ParamLine::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let ev = fs_event(FsMethod::Marginal { k: 1 }, &x, &line, 1.0).unwrap();
        assert_eq!(ev.selection, vec![0]);
        // |r| ≥ |r/2| holds for every r, so the event covers the whole line
        assert_eq!(ev.interval, Interval::REAL_LINE);
    }

    #[test]
    fn marginal_full_selection_is_unconstrained() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.5, 1.0], [3.0, 0.0]]).unwrap();
        let line = ParamLine::new(vec![1.0, -1.0, 0.0], vec![0.3, 0.1, 2.0]).unwrap();
        let ev = fs_event(FsMethod::Marginal { k: 2 }, &x, &line, 0.7).unwrap();
        assert_eq!(ev.interval, Interval::REAL_LINE);
    }

    #[test]
    fn cook_spike_boundary() {
        let x = Matrix::from_fn(8, 1, |_, _| 1.0);
        let mut b = vec![0.0; 8];
        b[7] = 1.0;
        let line = ParamLine::new(vec![0.0; 8], b).unwrap();
        let ev = od_event(OdMethod::Cook { threshold: 0.5 }, &x, &line, 8.0).unwrap();
        assert_eq!(ev.selection, vec![7]);
        // D_8 is scale free along this line, so only the tangency at r = 0 is excluded
        assert_eq!(ev.interval, Interval::REAL_LINE);
    }
}
