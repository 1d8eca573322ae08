use nalgebra::{DMatrix, DVector};

use super::ols::NormalEquations;
use super::DesignMatrix;
use crate::error::{Error, Result};

/// Least-squares estimates with Newey-West (Bartlett kernel) standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct HacResult {
    pub coefficients: DVector<f64>,
    pub standard_errors: DVector<f64>,
    pub t_stats: DVector<f64>,
    pub lags: usize,
    /// Set when the response has no variation; standard errors and t-stats are zero.
    pub degenerate: bool,
}

/// OLS with a heteroskedasticity and autocorrelation consistent covariance.
///
/// Lag weights are `1 - l / (lags + 1)`; `lags = 0` gives White's estimator.
pub fn newey_west(x: &DesignMatrix, y: &[f64], lags: usize) -> Result<HacResult> {
    x.check_response(y)?;
    let n = x.rows();
    if lags >= n {
        return Err(Error::domain(format!(
            "{lags} lags requested for {n} observations"
        )));
    }
    let k = x.cols();
    let ne = NormalEquations::new(x.values())?;
    let xv = x.values();

    let first = y.first().copied().unwrap_or(0.0);
    if x.intercept_included() && y.iter().all(|&v| v == first) {
        let mut coefficients = DVector::zeros(k);
        coefficients[0] = first;
        return Ok(HacResult {
            coefficients,
            standard_errors: DVector::zeros(k),
            t_stats: DVector::zeros(k),
            lags,
            degenerate: true,
        });
    }

    let yv = DVector::from_column_slice(y);
    let beta = ne.solve(&(xv.transpose() * &yv));
    let resid = &yv - xv * &beta;

    // Score contributions x_t * e_t, one row per observation.
    let scores = DMatrix::from_fn(n, k, |t, j| xv[(t, j)] * resid[t]);
    let mut meat = scores.transpose() * &scores;
    for lag in 1..=lags {
        let w = 1.0 - lag as f64 / (lags as f64 + 1.0);
        let lead = scores.rows(lag, n - lag);
        let lagged = scores.rows(0, n - lag);
        let gamma = lead.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * w;
    }
    let bread = ne.inverse();
    let cov = &bread * meat * &bread;
    let cov = (&cov + cov.transpose()) * 0.5;

    let standard_errors = DVector::from_fn(k, |j, _| cov[(j, j)].max(0.0).sqrt());
    let t_stats = DVector::from_fn(k, |j, _| beta[j] / standard_errors[j]);
    Ok(HacResult {
        coefficients: beta,
        standard_errors,
        t_stats,
        lags,
        degenerate: false,
    })
}

/// Newey-West t-statistic of the mean of a series.
pub fn mean_t_stat(series: &[f64], lags: usize) -> Result<(f64, f64)> {
    let x = DesignMatrix::intercept_only(series.len());
    let fit = newey_west(&x, series, lags)?;
    Ok((fit.coefficients[0], fit.t_stats[0]))
}
