//! Elastic net by cyclic coordinate descent, with leave-one-out tuning.
//!
//! Objective on internally standardized columns (mean 0, variance 1 with divisor `n`)
//! and a centered response:
//!
//! `(1 / 2n) |y - X b|^2 + lambda * (alpha |b|_1 + (1 - alpha) / 2 |b|^2)`
//!
//! The intercept is unpenalized; coefficients are reported on the original scale.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::DesignMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100_000;
const COORD_TOL: f64 = 1e-13;
const POLISH_TOL: f64 = 1e-6;
const SEED_SWEEPS: usize = 20;
const ACTIVE_SET_ITERS: usize = 100;
const KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedFit {
    pub intercept: f64,
    /// Slopes on the original (unstandardized) scale.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// 1 = lasso, 0 = ridge.
    pub alpha_mix: f64,
    /// Mean squared leave-one-out error at `lambda`; NaN when not cross-validated.
    pub cv_score: f64,
}

impl RegularizedFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

/// Standardized regression problem in covariance form: `gram = X'X / n` and
/// `xty = X'y / n` on centered, unit-variance columns and centered response.
pub(crate) struct Standardized {
    p: usize,
    gram: DMatrix<f64>,
    xty: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
}

/// Sums of a data set centered at fixed reference means, from which the
/// moments of any subset are recovered by downdating.
pub(crate) struct Moments {
    n: usize,
    x_ref: Vec<f64>,
    y_ref: f64,
    /// Centered rows.
    rows: DMatrix<f64>,
    resp: Vec<f64>,
    sx: Vec<f64>,
    sxx: DMatrix<f64>,
    sxy: Vec<f64>,
    sy: f64,
}

impl Moments {
    pub(crate) fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let (n, p) = x.shape();
        let nf = n as f64;
        let x_ref: Vec<f64> = (0..p).map(|j| x.column(j).sum() / nf).collect();
        let y_ref = y.iter().sum::<f64>() / nf;
        let rows = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_ref[j]);
        let resp: Vec<f64> = y.iter().map(|v| v - y_ref).collect();
        let sx = (0..p).map(|j| rows.column(j).sum()).collect();
        let sxx = rows.transpose() * &rows;
        let sxy = (0..p).map(|j| dot(rows.column(j).as_slice(), &resp)).collect();
        let sy = resp.iter().sum();
        Self {
            n,
            x_ref,
            y_ref,
            rows,
            resp,
            sx,
            sxx,
            sxy,
            sy,
        }
    }

    /// Problem over every observation.
    pub(crate) fn full(&self) -> Standardized {
        self.build(self.n, &self.sx, &self.sxx, &self.sxy, self.sy)
    }

    /// Problem with observation `i` removed.
    pub(crate) fn without(&self, i: usize) -> Standardized {
        let p = self.x_ref.len();
        let r = self.rows.row(i);
        let sx: Vec<f64> = (0..p).map(|j| self.sx[j] - r[j]).collect();
        let sxx = DMatrix::from_fn(p, p, |a, b| self.sxx[(a, b)] - r[a] * r[b]);
        let sxy: Vec<f64> = (0..p).map(|j| self.sxy[j] - r[j] * self.resp[i]).collect();
        self.build(self.n - 1, &sx, &sxx, &sxy, self.sy - self.resp[i])
    }

    fn build(&self, n: usize, sx: &[f64], sxx: &DMatrix<f64>, sxy: &[f64], sy: f64) -> Standardized {
        let p = sx.len();
        let nf = n as f64;
        let m: Vec<f64> = sx.iter().map(|s| s / nf).collect();
        let my = sy / nf;
        let sds: Vec<f64> = (0..p)
            .map(|j| {
                let v = (sxx[(j, j)] - nf * m[j] * m[j]) / nf;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let scale = |j: usize| if sds[j] > 0.0 { 1.0 / sds[j] } else { 0.0 };
        let gram = DMatrix::from_fn(p, p, |a, b| {
            (sxx[(a, b)] - nf * m[a] * m[b]) / nf * scale(a) * scale(b)
        });
        let xty = (0..p)
            .map(|j| (sxy[j] - nf * m[j] * my) / nf * scale(j))
            .collect();
        Standardized {
            p,
            gram,
            xty,
            means: (0..p).map(|j| self.x_ref[j] + m[j]).collect(),
            sds,
            y_mean: self.y_ref + my,
        }
    }
}

impl Standardized {
    pub(crate) fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        Moments::new(x, y).full()
    }

    /// Smallest lambda at which every standardized slope is zero.
    pub(crate) fn lambda_max(&self, alpha_mix: f64) -> f64 {
        let a = alpha_mix.max(1e-3);
        self.xty.iter().fold(0.0f64, |m, c| m.max(c.abs())) / a
    }

    /// Coordinate descent from `beta` (standardized scale), updated in place.
    /// A short run of sweeps seeds an active-set iteration that solves the
    /// stationarity equations exactly; full sweeps are the fallback.
    pub(crate) fn solve(&self, lambda: f64, alpha_mix: f64, beta: &mut [f64]) {
        let start = beta.to_vec();
        self.sweeps(lambda, alpha_mix, beta, POLISH_TOL, SEED_SWEEPS);
        if self.active_set(lambda, alpha_mix, beta) {
            return;
        }
        beta.copy_from_slice(&start);
        self.sweeps(lambda, alpha_mix, beta, COORD_TOL, MAX_SWEEPS);
    }

    /// Cyclic sweeps until the largest update is below `tol` or `max_sweeps` is reached.
    fn sweeps(&self, lambda: f64, alpha_mix: f64, beta: &mut [f64], tol: f64, max_sweeps: usize) {
        let p = self.p;
        let l1 = lambda * alpha_mix;
        let denom = 1.0 + lambda * (1.0 - alpha_mix);
        // grad[j] = xty[j] - (gram * beta)[j]
        let mut grad = self.xty.clone();
        for k in 0..p {
            if beta[k] != 0.0 {
                for j in 0..p {
                    grad[j] -= self.gram[(j, k)] * beta[k];
                }
            }
        }
        for _ in 0..max_sweeps {
            let mut max_change = 0.0f64;
            let mut max_coef = 0.0f64;
            for j in 0..p {
                if self.sds[j] == 0.0 {
                    continue;
                }
                let old = beta[j];
                let rho = grad[j] + self.gram[(j, j)] * old;
                let new = soft_threshold(rho, l1) / denom;
                if new != old {
                    let diff = new - old;
                    for k in 0..p {
                        grad[k] -= self.gram[(k, j)] * diff;
                    }
                    beta[j] = new;
                    max_change = max_change.max(diff.abs());
                }
                max_coef = max_coef.max(new.abs());
            }
            if max_change <= tol * max_coef.max(1.0) {
                return;
            }
        }
    }

    /// Solution of the stationarity equations on `active` with the given signs.
    fn active_solution(&self, active: &[usize], signs: &[f64], l1: f64, ridge: f64) -> Option<Vec<f64>> {
        let a = active.len();
        let m = DMatrix::from_fn(a, a, |r, c| {
            self.gram[(active[r], active[c])] + if r == c { ridge } else { 0.0 }
        });
        let rhs = DVector::from_fn(a, |r, _| self.xty[active[r]] - l1 * signs[r]);
        let sol = m.cholesky()?.solve(&rhs);
        Some(sol.iter().copied().collect())
    }

    /// Active-set iteration from `beta`; true once `beta` satisfies the optimality conditions.
    fn active_set(&self, lambda: f64, alpha_mix: f64, beta: &mut [f64]) -> bool {
        let l1 = lambda * alpha_mix;
        let ridge = lambda * (1.0 - alpha_mix);
        let slack = KKT_TOL * (1.0 + l1);
        let mut b = beta.to_vec();
        let mut signs: Vec<f64> = b.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        for _ in 0..ACTIVE_SET_ITERS {
            let active: Vec<usize> = (0..self.p).filter(|&j| signs[j] != 0.0).collect();
            let s: Vec<f64> = active.iter().map(|&j| signs[j]).collect();
            let Some(sol) = self.active_solution(&active, &s, l1, ridge) else {
                return false;
            };
            // Step towards the solution, stopping where a coefficient first reaches zero.
            let mut step = 1.0f64;
            let mut blocking = None;
            for (r, &j) in active.iter().enumerate() {
                if sol[r] * s[r] <= 0.0 {
                    let t = if b[j] * s[r] > 0.0 { b[j] / (b[j] - sol[r]) } else { 0.0 };
                    if t < step {
                        step = t;
                        blocking = Some(j);
                    }
                }
            }
            for (r, &j) in active.iter().enumerate() {
                b[j] = if b[j] * s[r] > 0.0 { b[j] + step * (sol[r] - b[j]) } else { step * sol[r] };
            }
            if let Some(j) = blocking {
                b[j] = 0.0;
                signs[j] = 0.0;
                continue;
            }
            let mut worst = None;
            let mut worst_excess = slack;
            for j in 0..self.p {
                if self.sds[j] == 0.0 || signs[j] != 0.0 {
                    continue;
                }
                let g = self.xty[j] - active.iter().map(|&k| self.gram[(j, k)] * b[k]).sum::<f64>();
                let excess = g.abs() - l1;
                if excess > worst_excess {
                    worst_excess = excess;
                    worst = Some((j, g.signum()));
                }
            }
            match worst {
                Some((j, sign)) => signs[j] = sign,
                None => {
                    beta.copy_from_slice(&b);
                    return true;
                }
            }
        }
        false
    }

    pub(crate) fn to_fit(&self, beta: &[f64], lambda: f64, alpha_mix: f64) -> RegularizedFit {
        let coefficients: Vec<f64> = beta
            .iter()
            .zip(&self.sds)
            .map(|(b, sd)| if *sd > 0.0 { b / sd } else { 0.0 })
            .collect();
        let intercept = self.y_mean
            - coefficients
                .iter()
                .zip(&self.means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        RegularizedFit {
            intercept,
            coefficients,
            lambda,
            alpha_mix,
            cv_score: f64::NAN,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn check_inputs(x: &DesignMatrix, y: &[f64], lambda: f64, alpha_mix: f64) -> Result<()> {
    x.check_response(y)?;
    if x.intercept_included() {
        return Err(Error::dimension(
            "pass regressors without a constant column; the intercept is implicit",
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda = {lambda} must be nonnegative")));
    }
    if !(0.0..=1.0).contains(&alpha_mix) {
        return Err(Error::domain(format!("alpha_mix = {alpha_mix} is outside [0, 1]")));
    }
    if x.rows() < 2 {
        return Err(Error::dimension("need at least two observations"));
    }
    Ok(())
}

/// Elastic-net fit at a single penalty.
pub fn coordinate_descent(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    alpha_mix: f64,
) -> Result<RegularizedFit> {
    check_inputs(x, y, lambda, alpha_mix)?;
    let st = Standardized::new(x.values(), y);
    let mut beta = vec![0.0; x.cols()];
    st.solve(lambda, alpha_mix, &mut beta);
    Ok(st.to_fit(&beta, lambda, alpha_mix))
}

/// `count` log-spaced penalties from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(x: &DesignMatrix, y: &[f64], alpha_mix: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    check_inputs(x, y, 0.0, alpha_mix)?;
    let st = Standardized::new(x.values(), y);
    let top = st.lambda_max(alpha_mix);
    if top == 0.0 || count == 0 {
        return Ok(vec![0.0]);
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|i| top * (step * i as f64).exp()).collect())
}

/// Mean squared leave-one-out prediction error for every penalty in `grid`,
/// each left-out point refit along the path with warm starts.
pub fn loo_errors(x: &DesignMatrix, y: &[f64], alpha_mix: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_inputs(x, y, 0.0, alpha_mix)?;
    let (n, p) = (x.rows(), x.cols());
    if n < 3 {
        return Err(Error::domain("leave-one-out tuning needs at least 3 observations"));
    }
    if grid.is_empty() {
        return Err(Error::domain("empty lambda grid"));
    }
    if grid.windows(2).any(|w| w[1] > w[0]) || grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::domain("lambda grid must be nonnegative and sorted descending"));
    }
    let xv = x.values();
    let moments = Moments::new(xv, y);
    let full = moments.full();
    // Full-sample path, used to warm-start every leave-one-out fit.
    let mut beta = vec![0.0; p];
    let path: Vec<Vec<f64>> = grid
        .iter()
        .map(|&lambda| {
            full.solve(lambda, alpha_mix, &mut beta);
            beta.clone()
        })
        .collect();
    let per_point: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|left_out| {
            let st = moments.without(left_out);
            let row: Vec<f64> = (0..p).map(|j| xv[(left_out, j)]).collect();
            grid.iter()
                .zip(&path)
                .map(|(&lambda, start)| {
                    let mut b = start.clone();
                    st.solve(lambda, alpha_mix, &mut b);
                    let e = y[left_out] - st.to_fit(&b, lambda, alpha_mix).predict(&row);
                    e * e
                })
                .collect()
        })
        .collect();
    let mut mse = vec![0.0; grid.len()];
    for errs in &per_point {
        for (m, e) in mse.iter_mut().zip(errs) {
            *m += e;
        }
    }
    Ok(mse.into_iter().map(|s| s / n as f64).collect())
}

/// Chooses the penalty in `grid` (sorted descending) with the smallest
/// leave-one-out error, ties going to the larger penalty, and refits on all data.
pub fn loo_cv_tune(x: &DesignMatrix, y: &[f64], alpha_mix: f64, grid: &[f64]) -> Result<RegularizedFit> {
    let errors = loo_errors(x, y, alpha_mix, grid)?;
    let mut best = 0;
    for (i, e) in errors.iter().enumerate() {
        if *e < errors[best] {
            best = i;
        }
    }
    let mut fit = coordinate_descent(x, y, grid[best], alpha_mix)?;
    fit.cv_score = errors[best];
    Ok(fit)
}
