use serde::{Deserialize, Serialize};

use super::ReturnPanel;
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::simple_regression;
use crate::qfa::{FactorKey, RollingFactorSeries};

/// Rolling estimation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub min_obs_beta: usize,
    pub step: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: 60,
            min_obs_beta: 48,
            step: 1,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 || self.step == 0 {
            return Err(Error::config("window length must be at least 2 and step positive"));
        }
        if self.min_obs_beta == 0 || self.min_obs_beta > self.length {
            return Err(Error::config(format!(
                "min_obs_beta = {} must lie in 1..={}",
                self.min_obs_beta, self.length
            )));
        }
        Ok(())
    }
}

/// One exposure estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub window_end: Month,
    pub asset: String,
    pub key: FactorKey,
    pub beta: f64,
    pub n_obs: usize,
}

/// Spliced factor differences placed on `dates`; NaN where undefined.
pub fn align_diffs(series: &RollingFactorSeries, dates: &[Month]) -> Vec<f64> {
    dates
        .iter()
        .map(|&m| series.diff_at(m).unwrap_or(f64::NAN))
        .collect()
}

/// OLS slopes of each asset's excess return on `regressor` over the window
/// ending at `end`, using months where both are observed. Assets with fewer
/// than `min_obs_beta` such months, or a regressor without variation, are omitted.
///
/// `risk_free` and `regressor` are aligned with `panel.dates`.
pub fn estimate_betas(
    panel: &ReturnPanel,
    risk_free: &[f64],
    regressor: &[f64],
    key: &FactorKey,
    window: &WindowSpec,
    end: Month,
) -> Result<Vec<BetaRow>> {
    let t_len = panel.n_dates();
    if risk_free.len() != t_len || regressor.len() != t_len {
        return Err(Error::dimension("risk-free and regressor series must align with the panel"));
    }
    let Some(last) = panel.date_index(end) else {
        return Err(Error::validation(format!("window end {end} is outside the panel")));
    };
    let first = (last + 1).saturating_sub(window.length);
    let mut rows = Vec::new();
    let mut x = Vec::with_capacity(window.length);
    let mut y = Vec::with_capacity(window.length);
    for (i, asset) in panel.assets.iter().enumerate() {
        x.clear();
        y.clear();
        for t in first..=last {
            let r = panel.returns[(t, i)];
            let f = regressor[t];
            if !r.is_nan() && !f.is_nan() && !risk_free[t].is_nan() {
                x.push(f);
                y.push(r - risk_free[t]);
            }
        }
        if x.len() < window.min_obs_beta {
            continue;
        }
        if let Some((_, slope)) = simple_regression(&x, &y) {
            rows.push(BetaRow {
                window_end: end,
                asset: asset.clone(),
                key: key.clone(),
                beta: slope,
                n_obs: x.len(),
            });
        }
    }
    Ok(rows)
}
