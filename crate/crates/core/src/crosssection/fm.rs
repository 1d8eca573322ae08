use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ExposureMatrix;
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::{mean_t_stat, ols, DesignMatrix};
use crate::pipeline::ReturnPanel;

/// Largest share of cross-sections that may be dropped as rank deficient.
const MAX_SKIPPED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct FmResult {
    /// `"const"` followed by the exposure names.
    pub names: Vec<String>,
    /// Return month of each retained cross-section.
    pub dates: Vec<Month>,
    /// One coefficient vector per retained cross-section.
    pub lambdas_t: Vec<Vec<f64>>,
    pub lambda_mean: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub n_periods: usize,
    /// Cross-sections dropped because the design was rank deficient.
    pub skipped: usize,
}

impl FmResult {
    /// Average prices of risk in percent.
    pub fn lambda_mean_pct(&self) -> Vec<f64> {
        self.lambda_mean.iter().map(|l| l * 100.0).collect()
    }
}

/// Fama-MacBeth regressions of excess returns at `t + 1` on an intercept and
/// the exposures dated `t`, with Newey-West t-statistics of the average prices of risk.
pub fn fama_macbeth(
    panel: &ReturnPanel,
    risk_free: &[f64],
    exposures: &[(&str, &ExposureMatrix)],
    nw_lags: usize,
) -> Result<FmResult> {
    if exposures.is_empty() {
        return Err(Error::config("Fama-MacBeth needs at least one exposure"));
    }
    for (_, e) in exposures {
        e.check_grid(panel)?;
    }
    let t_len = panel.n_dates();
    if risk_free.len() != t_len {
        return Err(Error::dimension("risk-free series must align with the panel"));
    }
    let k = exposures.len() + 1;
    let periods: Vec<Option<Option<Vec<f64>>>> = (0..t_len.saturating_sub(1))
        .into_par_iter()
        .map(|t| {
            let rows: Vec<usize> = (0..panel.n_assets())
                .filter(|&i| {
                    !panel.returns[(t + 1, i)].is_nan()
                        && exposures.iter().all(|(_, e)| !e.values[(t, i)].is_nan())
                })
                .collect();
            if rows.is_empty() {
                return None;
            }
            if rows.len() <= k {
                return Some(None);
            }
            let x = DMatrix::from_fn(rows.len(), k, |r, c| {
                if c == 0 {
                    1.0
                } else {
                    exposures[c - 1].1.values[(t, rows[r])]
                }
            });
            let y: Vec<f64> = rows
                .iter()
                .map(|&i| panel.returns[(t + 1, i)] - risk_free[t + 1])
                .collect();
            let design = DesignMatrix::new(x, true).ok()?;
            match ols(&design, &y) {
                Ok(b) => Some(Some(b.iter().copied().collect())),
                Err(_) => Some(None),
            }
        })
        .collect();

    let mut dates = Vec::new();
    let mut lambdas_t = Vec::new();
    let mut skipped = 0;
    for (t, p) in periods.into_iter().enumerate() {
        match p {
            None => {}
            Some(None) => {
                log::warn!("cross-section {} is rank deficient; skipped", panel.dates[t + 1]);
                skipped += 1;
            }
            Some(Some(l)) => {
                dates.push(panel.dates[t + 1]);
                lambdas_t.push(l);
            }
        }
    }
    let total = lambdas_t.len() + skipped;
    if total == 0 {
        return Err(Error::domain("no cross-section has both exposures and next-month returns"));
    }
    if skipped as f64 > MAX_SKIPPED_SHARE * total as f64 {
        return Err(Error::singular(format!(
            "{skipped} of {total} cross-sections are rank deficient"
        )));
    }
    let mut lambda_mean = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    for c in 0..k {
        let series: Vec<f64> = lambdas_t.iter().map(|l| l[c]).collect();
        let lags = nw_lags.min(series.len().saturating_sub(1));
        let (m, t) = mean_t_stat(&series, lags)?;
        lambda_mean.push(m);
        t_stats.push(t);
    }
    let mut names = vec!["const".to_string()];
    names.extend(exposures.iter().map(|(n, _)| n.to_string()));
    Ok(FmResult {
        names,
        n_periods: dates.len(),
        dates,
        lambdas_t,
        lambda_mean,
        t_stats,
        skipped,
    })
}
