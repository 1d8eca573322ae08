use nalgebra::{DMatrix, DVector};

use super::{ObservedFactors, ReturnPanel};
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::{pca, NormalEquations};
use crate::qfa::ResidualPanel;

/// Factor columns used to strip common return components.
pub const DEFAULT_RESIDUAL_FACTORS: [&str; 3] = ["mktrf", "smb", "hml"];

/// Residuals of excess returns on an intercept and `columns` over the `len`
/// months starting at `start`, for every asset observed in all of them.
pub fn residualize(
    panel: &ReturnPanel,
    factors: &ObservedFactors,
    start: Month,
    len: usize,
    columns: &[String],
    min_assets: usize,
) -> Result<ResidualPanel> {
    let t0 = panel
        .date_index(start)
        .filter(|&t| t + len <= panel.n_dates())
        .ok_or_else(|| Error::validation(format!("panel does not cover {len} months from {start}")))?;
    let f_range = factors.range(start, len)?;
    let regressors: Vec<&[f64]> = columns
        .iter()
        .map(|c| factors.require(c).map(|s| &s[f_range.clone()]))
        .collect::<Result<_>>()?;
    let rf = &factors.risk_free[f_range];

    let x = DMatrix::from_fn(len, regressors.len() + 1, |t, j| {
        if j == 0 {
            1.0
        } else {
            regressors[j - 1][t]
        }
    });
    let complete: Vec<usize> = (0..panel.n_assets())
        .filter(|&i| (t0..t0 + len).all(|t| !panel.returns[(t, i)].is_nan()))
        .collect();
    if complete.len() < min_assets {
        return Err(Error::domain(format!(
            "window from {start}: {} assets with complete data, need {min_assets}",
            complete.len()
        )));
    }
    let ne = NormalEquations::new(&x)?;
    let mut values = DMatrix::zeros(len, complete.len());
    for (k, &i) in complete.iter().enumerate() {
        let y = DVector::from_fn(len, |t, _| panel.returns[(t0 + t, i)] - rf[t]);
        let beta = ne.solve(&(x.transpose() * &y));
        let resid = &y - &x * beta;
        values.set_column(k, &resid);
    }
    ResidualPanel::new(
        start.range(len),
        complete.iter().map(|&i| panel.assets[i].clone()).collect(),
        values,
    )
}

/// Divides each residual by its EWMA volatility forecast
/// `s2[t] = lambda s2[t-1] + (1 - lambda) e[t-1]^2`, started at the asset's sample
/// variance. Assets with zero variance are dropped.
pub fn ewma_standardize(residuals: &ResidualPanel, lambda: f64) -> Result<ResidualPanel> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("ewma lambda = {lambda} is outside (0, 1)")));
    }
    let t_len = residuals.n_dates();
    if t_len < 2 {
        return Err(Error::dimension("ewma needs at least two dates"));
    }
    let mut kept = Vec::new();
    let mut cols = Vec::new();
    for (i, col) in residuals.values.column_iter().enumerate() {
        let mean = col.mean();
        let var = col.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (t_len - 1) as f64;
        if !(var > 0.0) {
            log::warn!(
                "asset {} has zero residual variance; dropped from standardized panel",
                residuals.assets[i]
            );
            continue;
        }
        let mut s2 = var;
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            if t > 0 {
                s2 = lambda * s2 + (1.0 - lambda) * col[t - 1] * col[t - 1];
            }
            out.push(col[t] / s2.sqrt());
        }
        kept.push(i);
        cols.push(out);
    }
    let values = DMatrix::from_fn(t_len, kept.len(), |t, k| cols[k][t]);
    ResidualPanel::new(
        residuals.dates.clone(),
        kept.iter().map(|&i| residuals.assets[i].clone()).collect(),
        values,
    )
}

/// First principal component score of the squared residuals.
pub fn pca_sq_factor(residuals: &ResidualPanel) -> Result<Vec<f64>> {
    if residuals.n_dates() == 0 || residuals.n_assets() == 0 {
        return Err(Error::dimension("empty residual panel"));
    }
    let squared = residuals.values.map(|e| e * e);
    Ok(pca(&squared, 1)?.scores.column(0).iter().copied().collect())
}
