//! Linear quantile regression under the check loss.
//!
//! The solver runs a smoothed iteratively reweighted least-squares warm start
//! and then walks the vertices of the underlying linear program (exchanging one
//! interpolated observation at a time along the steepest descent edge) until no
//! edge decreases the objective. The returned coefficients therefore interpolate
//! `p` observations and are an exact LP optimum up to floating point.

use nalgebra::{DMatrix, DVector};

use super::ols::NormalEquations;
use super::DesignMatrix;
use crate::error::{Error, Result};

const IRLS_MAX_ITER: usize = 200;
const IRLS_REL_TOL: f64 = 1e-8;

/// `(tau - 1{u <= 0}) * u`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    validate_tau(tau)?;
    Ok(rho(u, tau))
}

pub(crate) fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("tau = {tau} is outside (0, 1)")))
    }
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u > 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Mean check loss of a residual vector.
pub fn mean_check_loss(residuals: impl IntoIterator<Item = f64>, tau: f64) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for u in residuals {
        s += rho(u, tau);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFitResult {
    pub coefficients: DVector<f64>,
    pub tau: f64,
    /// Mean check loss at `coefficients`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes the mean check loss of `y - X b` over `b`.
pub fn quantile_regression(x: &DesignMatrix, y: &[f64], tau: f64) -> Result<QuantileFitResult> {
    validate_tau(tau)?;
    x.check_response(y)?;
    let xv = x.values();
    let (n, p) = xv.shape();
    if p == 0 {
        return Err(Error::dimension("design has no columns"));
    }
    let ne = NormalEquations::new(xv)?;

    if p == 1 {
        let col = xv.column(0);
        let b = scalar_quantile_fit(col.as_slice(), y, tau);
        let objective = mean_check_loss(col.iter().zip(y).map(|(xi, yi)| yi - b * xi), tau);
        return Ok(QuantileFitResult {
            coefficients: DVector::from_element(1, b),
            tau,
            objective,
            iterations: 1,
            converged: true,
        });
    }

    let yv = DVector::from_column_slice(y);
    let warm = irls(xv, &yv, tau, ne.solve(&(xv.transpose() * &yv)));
    let (beta, pivots, optimal) = vertex_descent(xv, &yv, tau, &warm.0, 10 * n + 100)?;
    let objective = mean_check_loss((&yv - xv * &beta).iter().copied(), tau);
    Ok(QuantileFitResult {
        coefficients: beta,
        tau,
        objective,
        iterations: warm.1 + pivots,
        converged: optimal,
    })
}

/// Exact minimizer of `sum_t rho(y_t - b x_t)` over a scalar `b` (no intercept).
///
/// Writing `rho_tau(y - b x) = |x| rho_{tau'}(y / x - b)` with `tau' = tau` for
/// `x > 0` and `1 - tau` otherwise, the optimum is a weighted quantile of the
/// ratios `y / x` with weights `|x|`.
pub fn scalar_quantile_fit(x: &[f64], y: &[f64], tau: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(x.len());
    let mut target = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi == 0.0 {
            continue;
        }
        let w = xi.abs();
        target += if xi > 0.0 { w * tau } else { w * (1.0 - tau) };
        pts.push((yi / xi, w));
    }
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    for &(z, w) in &pts {
        cum += w;
        if cum >= target {
            return z;
        }
    }
    pts[pts.len() - 1].0
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, start: DVector<f64>) -> (DVector<f64>, usize) {
    let n = x.nrows();
    let mut beta = start;
    let mut resid = y - x * &beta;
    let mut obj = mean_check_loss(resid.iter().copied(), tau);
    let scale = resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    if scale == 0.0 {
        return (beta, 0);
    }
    let mut eps = scale;
    let floor = scale * 1e-8;
    let mut iterations = 0;
    for _ in 0..IRLS_MAX_ITER {
        iterations += 1;
        let w: Vec<f64> = resid
            .iter()
            .map(|&r| {
                let side = if r > 0.0 { tau } else { 1.0 - tau };
                side / r.abs().max(eps)
            })
            .collect();
        let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
        let gram = xw.transpose() * x;
        let rhs = xw.transpose() * y;
        let Some(next) = gram.cholesky().map(|c| c.solve(&rhs)) else {
            break;
        };
        let next_resid = y - x * &next;
        let next_obj = mean_check_loss(next_resid.iter().copied(), tau);
        eps = (eps * 0.5).max(floor);
        let improved = next_obj <= obj;
        if improved {
            let rel = (obj - next_obj) / obj.max(f64::MIN_POSITIVE);
            beta = next;
            resid = next_resid;
            obj = next_obj;
            if rel < IRLS_REL_TOL && eps <= floor {
                break;
            }
        } else if eps <= floor {
            break;
        }
    }
    (beta, iterations)
}

/// Picks `p` linearly independent rows, preferring small absolute residuals.
fn initial_basis(x: &DMatrix<f64>, resid: &DVector<f64>) -> Option<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()).then(a.cmp(&b)));
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(p);
    for i in order {
        let row = x.row(i).transpose();
        let norm0 = row.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for q in &ortho {
            let c = q.dot(&v);
            v -= q * c;
        }
        let nv = v.norm();
        if nv > 1e-8 * norm0 {
            ortho.push(v / nv);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

fn basis_solution(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    basis: &[usize],
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let p = basis.len();
    let b = DMatrix::from_fn(p, p, |r, c| x[(basis[r], c)]);
    let binv = b.try_inverse()?;
    let yb = DVector::from_fn(p, |r, _| y[basis[r]]);
    Some((&binv * yb, binv))
}

/// Simplex-style descent over basic solutions. Returns the coefficients,
/// the number of pivots and whether optimality was certified.
fn vertex_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    warm: &DVector<f64>,
    max_pivots: usize,
) -> Result<(DVector<f64>, usize, bool)> {
    let (n, p) = x.shape();
    let warm_resid = y - x * warm;
    let mut basis =
        initial_basis(x, &warm_resid).ok_or_else(|| Error::singular("design is rank deficient"))?;
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let zero_tol = 1e-12 * y_scale;

    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }

    let mut pivots = 0;
    loop {
        let (beta, binv) = basis_solution(x, y, &basis)
            .ok_or_else(|| Error::singular("basis matrix became singular"))?;
        let mut resid = y - x * &beta;
        for &i in &basis {
            resid[i] = 0.0;
        }
        // g[i, k] = x_i' B^{-1} e_k: rate of change of fit i when moving off basis row k.
        let g = x * &binv;

        // Directional derivative for every (k, s) edge.
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..p {
            for s in [1.0f64, -1.0] {
                let mut d = if s > 0.0 { 1.0 - tau } else { tau };
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let delta = -s * g[(i, k)];
                    let r = resid[i];
                    d += if r > zero_tol {
                        tau * delta
                    } else if r < -zero_tol {
                        (tau - 1.0) * delta
                    } else if delta > 0.0 {
                        tau * delta
                    } else {
                        (tau - 1.0) * delta
                    };
                }
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((k, s, d));
                }
            }
        }
        let (k, s, d0) = best.expect("p >= 1");
        let row_scale: f64 = (0..n).map(|i| g[(i, k)].abs()).sum::<f64>().max(1.0);
        if d0 >= -1e-12 * row_scale {
            return Ok((beta, pivots, true));
        }
        if pivots >= max_pivots {
            return Ok((beta, pivots, false));
        }

        // Piecewise-linear line search: the slope rises by |g_ik| at each crossing.
        let mut crossings: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            if in_basis[i] {
                continue;
            }
            let rate = s * g[(i, k)];
            let r = resid[i];
            if r.abs() <= zero_tol || rate.abs() < 1e-14 {
                continue;
            }
            let t = r / rate;
            if t > 0.0 {
                crossings.push((t, i));
            }
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut slope = d0;
        let mut entering = None;
        for &(_, i) in &crossings {
            slope += g[(i, k)].abs();
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let Some(entering) = entering else {
            return Ok((beta, pivots, false));
        };
        in_basis[basis[k]] = false;
        in_basis[entering] = true;
        basis[k] = entering;
        pivots += 1;
    }
}
