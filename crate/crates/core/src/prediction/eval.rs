use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::stats::{correlation, std_dev};
use crate::numerics::{newey_west, ols, DesignMatrix};

/// Predictive regression summary; all R-squared values in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionEval {
    /// Slope times the predictor's standard deviation, annualized, in percent.
    pub coeff_scaled: f64,
    pub t_stat: f64,
    pub r2_is: f64,
    pub r2_oos: f64,
    pub r2_is_ct: f64,
    pub r2_oos_ct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateEval {
    pub eval: PredictionEval,
    pub control_coeff_scaled: f64,
    pub control_t: f64,
}

fn check_lengths(y: &[f64], xs: &[&[f64]], nw_lags: usize) -> Result<()> {
    if xs.iter().any(|x| x.len() != y.len()) {
        return Err(Error::dimension("predictor and return series differ in length"));
    }
    if y.len() < nw_lags + 10 {
        return Err(Error::domain(format!(
            "{} observations are too few for {nw_lags} Newey-West lags",
            y.len()
        )));
    }
    if y.iter().chain(xs.iter().copied().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::domain("series contain missing or non-finite values"));
    }
    Ok(())
}

fn ct(f: f64) -> f64 {
    f.max(0.0)
}

/// In-sample R-squared (percent) of `fitted`, optionally truncated at zero.
pub fn is_r2(y: &[f64], fitted: &[f64], truncate: bool) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse: f64 = y
        .iter()
        .zip(fitted)
        .map(|(v, f)| {
            let f = if truncate { ct(*f) } else { *f };
            (v - f) * (v - f)
        })
        .sum();
    (1.0 - sse / sst) * 100.0
}

/// Expanding historical mean of `y` before each out-of-sample month.
pub fn historical_mean_forecasts(y: &[f64], first_window: usize) -> Vec<f64> {
    let mut sum: f64 = y[..first_window.min(y.len())].iter().sum();
    let mut out = Vec::with_capacity(y.len().saturating_sub(first_window));
    for k in first_window..y.len() {
        out.push(sum / k as f64);
        sum += y[k];
    }
    out
}

fn check_window(n: usize, first_window: usize) -> Result<()> {
    if first_window < 2 || first_window >= n {
        return Err(Error::domain(format!(
            "first estimation window {first_window} must lie in 2..{n}"
        )));
    }
    Ok(())
}

/// Out-of-sample R-squared (percent) of `forecasts` for `y[first_window..]`
/// against the expanding historical mean. With `truncate`, every forecast is
/// floored at zero first.
pub fn oos_r2(y: &[f64], forecasts: &[f64], first_window: usize, truncate: bool) -> Result<f64> {
    check_window(y.len(), first_window)?;
    if forecasts.len() != y.len() - first_window {
        return Err(Error::dimension("one forecast per out-of-sample month is required"));
    }
    let base = historical_mean_forecasts(y, first_window);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((v, f), b) in y[first_window..].iter().zip(forecasts).zip(&base) {
        let f = if truncate { ct(*f) } else { *f };
        num += (v - f) * (v - f);
        den += (v - b) * (v - b);
    }
    if den == 0.0 {
        return Err(Error::domain("historical-mean benchmark has zero squared error"));
    }
    Ok((1.0 - num / den) * 100.0)
}

/// Expanding-window OLS forecasts of `y[first_window..]` on an intercept and `predictors`.
/// A window whose design is singular forecasts the window mean.
pub fn expanding_forecasts(y: &[f64], predictors: &[&[f64]], first_window: usize) -> Result<Vec<f64>> {
    check_window(y.len(), first_window)?;
    if predictors.iter().any(|x| x.len() != y.len()) {
        return Err(Error::dimension("predictor and return series differ in length"));
    }
    let k = predictors.len();
    let full = DMatrix::from_fn(y.len(), k + 1, |t, j| if j == 0 { 1.0 } else { predictors[j - 1][t] });
    (first_window..y.len())
        .map(|end| {
            let x = DesignMatrix::new(full.rows(0, end).into_owned(), true)?;
            let b = match ols(&x, &y[..end]) {
                Ok(b) => b,
                Err(Error::Singular(_)) => {
                    let mut b = DVector::zeros(k + 1);
                    b[0] = y[..end].iter().sum::<f64>() / end as f64;
                    b
                }
                Err(e) => return Err(e),
            };
            Ok((full.row(end) * b)[0])
        })
        .collect()
}

fn evaluate(y: &[f64], predictors: &[&[f64]], nw_lags: usize, first_window: usize) -> Result<(PredictionEval, Vec<f64>)> {
    let x = DesignMatrix::from_columns(predictors, true)?;
    let fit = newey_west(&x, y, nw_lags)?;
    let fitted: Vec<f64> = x.fitted(&fit.coefficients).iter().copied().collect();
    let forecasts = expanding_forecasts(y, predictors, first_window)?;
    let scaled: Vec<f64> = predictors
        .iter()
        .enumerate()
        .map(|(j, p)| fit.coefficients[j + 1] * std_dev(p) * 12.0 * 100.0)
        .collect();
    let eval = PredictionEval {
        coeff_scaled: scaled[0],
        t_stat: fit.t_stats[1],
        r2_is: is_r2(y, &fitted, false),
        r2_oos: oos_r2(y, &forecasts, first_window, false)?,
        r2_is_ct: is_r2(y, &fitted, true),
        r2_oos_ct: oos_r2(y, &forecasts, first_window, true)?,
    };
    let t_stats = fit.t_stats.iter().skip(1).copied().collect::<Vec<_>>();
    Ok((eval, scaled.into_iter().chain(t_stats).collect()))
}

/// Predictive regression of `y` on one lagged predictor.
pub fn predict_univariate(y: &[f64], x: &[f64], nw_lags: usize, first_window: usize) -> Result<PredictionEval> {
    check_lengths(y, &[x], nw_lags)?;
    Ok(evaluate(y, &[x], nw_lags, first_window)?.0)
}

/// Predictive regression on `x` and a control series.
pub fn predict_bivariate(
    y: &[f64],
    x: &[f64],
    control: &[f64],
    nw_lags: usize,
    first_window: usize,
) -> Result<BivariateEval> {
    check_lengths(y, &[x, control], nw_lags)?;
    let c = correlation(x, control);
    if !(c.abs() <= 0.999) {
        return Err(Error::singular(format!(
            "predictor and control are collinear (correlation {c:.6})"
        )));
    }
    let (eval, extra) = evaluate(y, &[x, control], nw_lags, first_window)?;
    Ok(BivariateEval {
        eval,
        control_coeff_scaled: extra[1],
        control_t: extra[3],
    })
}
