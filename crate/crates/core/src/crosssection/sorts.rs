use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExposureMatrix;
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::{mean_t_stat, newey_west, DesignMatrix};
use crate::pipeline::{ObservedFactors, ReturnPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Equal,
    /// Market capitalization at the formation date.
    Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortConfig {
    pub n_portfolios: usize,
    pub weighting: Weighting,
    /// 1: next-month return; otherwise buy-and-hold over this many months.
    pub holding_months: usize,
    pub nw_lags: usize,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            n_portfolios: 10,
            weighting: Weighting::Equal,
            holding_months: 1,
            nw_lags: 6,
        }
    }
}

impl SortConfig {
    fn validate(&self) -> Result<()> {
        if self.n_portfolios < 2 {
            return Err(Error::config("need at least two portfolios"));
        }
        if self.holding_months == 0 {
            return Err(Error::config("holding period must be at least one month"));
        }
        Ok(())
    }

    /// Newey-West lags for the H-L series; overlapping holding returns need at least 12.
    pub fn hl_lags(&self) -> usize {
        if self.holding_months > 1 {
            self.nw_lags.max(12)
        } else {
            self.nw_lags
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortResult {
    pub config: SortConfig,
    pub formation_dates: Vec<Month>,
    /// Holding-period return of each portfolio (columns Low..High) per formation date.
    pub portfolio_returns: DMatrix<f64>,
    /// Mean sorting exposure per portfolio and formation date.
    pub signal_means: DMatrix<f64>,
    /// Mean control exposure per portfolio (dependent sorts only).
    pub control_means: Option<DMatrix<f64>>,
    /// High minus Low holding-period returns.
    pub hl: Vec<f64>,
    /// Annualized mean H-L return in percent.
    pub hl_return: f64,
    pub hl_t: f64,
    /// Holdings compounded over fewer months than the holding period.
    pub partial_holdings: usize,
    pub alpha6: Option<f64>,
    pub alpha6_t: Option<f64>,
}

impl SortResult {
    fn annualization(&self) -> f64 {
        12.0 / self.config.holding_months as f64 * 100.0
    }

    /// Annualized mean return of each portfolio in percent.
    pub fn portfolio_means_pct(&self) -> Vec<f64> {
        let a = self.annualization();
        self.portfolio_returns
            .column_iter()
            .map(|c| c.mean() * a)
            .collect()
    }

    /// Month of the first return of each holding period.
    pub fn return_dates(&self) -> Vec<Month> {
        self.formation_dates.iter().map(|d| d.succ()).collect()
    }

    /// Adds the factor-model alpha of the monthly H-L series.
    pub fn with_alpha(mut self, factors: &ObservedFactors, columns: &[String]) -> Result<Self> {
        if self.config.holding_months != 1 {
            return Err(Error::config("alphas are defined for one-month holding periods"));
        }
        let (a, t) = alpha_regression(&self.hl, &self.return_dates(), factors, columns, self.config.nw_lags)?;
        self.alpha6 = Some(a);
        self.alpha6_t = Some(t);
        Ok(self)
    }
}

/// Portfolio index of each asset: ascending by value, ties by identifier, rank
/// `k` of `n` assets going to portfolio `floor(k * n_portfolios / n)`.
pub fn assign_univariate(values: &[f64], ids: &[&str], n_portfolios: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then_with(|| ids[a].cmp(ids[b])));
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * n_portfolios / n;
    }
    out
}

/// `(control bin, target bin)` of each asset: sort on `control`, then on
/// `target` within each control bin. `None` if a control bin holds fewer
/// than `n_portfolios` assets.
pub fn assign_dependent(control: &[f64], target: &[f64], ids: &[&str], n_portfolios: usize) -> Option<Vec<(usize, usize)>> {
    let outer = assign_univariate(control, ids, n_portfolios);
    let mut out = vec![(0, 0); control.len()];
    for c in 0..n_portfolios {
        let members: Vec<usize> = (0..control.len()).filter(|&i| outer[i] == c).collect();
        if members.len() < n_portfolios {
            return None;
        }
        let vals: Vec<f64> = members.iter().map(|&i| target[i]).collect();
        let mids: Vec<&str> = members.iter().map(|&i| ids[i]).collect();
        for (k, inner) in assign_univariate(&vals, &mids, n_portfolios).into_iter().enumerate() {
            out[members[k]] = (c, inner);
        }
    }
    Some(out)
}

struct Formation {
    returns: Vec<f64>,
    signal: Vec<f64>,
    control: Vec<f64>,
    partial: usize,
}

/// Holding-period return of asset `i` after formation row `t`; `None` if the
/// first month is missing. The flag marks compounding over fewer months.
fn holding_return(panel: &ReturnPanel, t: usize, i: usize, h: usize) -> Option<(f64, bool)> {
    let first = panel.returns[(t + 1, i)];
    if first.is_nan() {
        return None;
    }
    let mut gross = 1.0 + first;
    let mut partial = false;
    for s in t + 2..=t + h {
        let r = panel.returns[(s, i)];
        if r.is_nan() {
            partial = true;
        } else {
            gross *= 1.0 + r;
        }
    }
    Some((gross - 1.0, partial))
}

fn weights(panel: &ReturnPanel, t: usize, members: &[usize], weighting: Weighting) -> Result<Vec<f64>> {
    match weighting {
        Weighting::Equal => Ok(vec![1.0; members.len()]),
        Weighting::Value => {
            let caps = panel
                .market_caps
                .as_ref()
                .ok_or_else(|| Error::validation("value weighting requires market caps in the panel"))?;
            let bad: Vec<&str> = members
                .iter()
                .filter(|&&i| !(caps[(t, i)] > 0.0))
                .map(|&i| panel.assets[i].as_str())
                .collect();
            if !bad.is_empty() {
                let shown: Vec<&str> = bad.iter().take(5).copied().collect();
                return Err(Error::validation(format!(
                    "missing market caps at {} for {} assets: {}",
                    panel.dates[t],
                    bad.len(),
                    shown.join(", ")
                )));
            }
            Ok(members.iter().map(|&i| caps[(t, i)]).collect())
        }
    }
}

fn weighted_mean(values: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total
}

/// Assets with an exposure (and control, if any) at `t` and a return at `t + 1`,
/// with their holding returns.
fn eligible(
    panel: &ReturnPanel,
    t: usize,
    h: usize,
    signal: &ExposureMatrix,
    control: Option<&ExposureMatrix>,
) -> (Vec<usize>, Vec<f64>, usize) {
    let mut members = Vec::new();
    let mut rets = Vec::new();
    let mut partial = 0;
    for i in 0..panel.n_assets() {
        if signal.values[(t, i)].is_nan() || control.is_some_and(|c| c.values[(t, i)].is_nan()) {
            continue;
        }
        if let Some((r, p)) = holding_return(panel, t, i, h) {
            members.push(i);
            rets.push(r);
            partial += usize::from(p);
        }
    }
    (members, rets, partial)
}

fn group_stats(
    n_groups: usize,
    groups: &[usize],
    rets: &[f64],
    w: &[f64],
    signal: &[f64],
    control: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = Vec::with_capacity(n_groups);
    let mut s = Vec::with_capacity(n_groups);
    let mut c = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let idx: Vec<usize> = (0..groups.len()).filter(|&k| groups[k] == g).collect();
        let gw: Vec<f64> = idx.iter().map(|&k| w[k]).collect();
        let pick = |v: &[f64]| idx.iter().map(|&k| v[k]).collect::<Vec<_>>();
        r.push(weighted_mean(&pick(rets), &gw));
        let m = idx.len() as f64;
        s.push(pick(signal).iter().sum::<f64>() / m);
        c.push(pick(control).iter().sum::<f64>() / m);
    }
    (r, s, c)
}

fn finish(config: SortConfig, rows: Vec<(Month, Formation)>, dependent: bool) -> Result<SortResult> {
    if rows.is_empty() {
        return Err(Error::domain("no formation date has enough eligible assets"));
    }
    let n = config.n_portfolios;
    let d = rows.len();
    let portfolio_returns = DMatrix::from_fn(d, n, |r, c| rows[r].1.returns[c]);
    let signal_means = DMatrix::from_fn(d, n, |r, c| rows[r].1.signal[c]);
    let control_means = dependent.then(|| DMatrix::from_fn(d, n, |r, c| rows[r].1.control[c]));
    let hl: Vec<f64> = (0..d)
        .map(|r| portfolio_returns[(r, n - 1)] - portfolio_returns[(r, 0)])
        .collect();
    let lags = config.hl_lags().min(d.saturating_sub(1));
    let (mean, hl_t) = mean_t_stat(&hl, lags)?;
    Ok(SortResult {
        config,
        formation_dates: rows.iter().map(|(m, _)| *m).collect(),
        portfolio_returns,
        signal_means,
        control_means,
        hl_return: mean * 12.0 / config.holding_months as f64 * 100.0,
        hl,
        hl_t,
        partial_holdings: rows.iter().map(|(_, f)| f.partial).sum(),
        alpha6: None,
        alpha6_t: None,
    })
}

fn formation_rows(panel: &ReturnPanel, h: usize) -> std::ops::Range<usize> {
    0..panel.n_dates().saturating_sub(h)
}

/// Univariate portfolio sort on `signal`. Formation dates with fewer eligible
/// assets than portfolios are skipped.
pub fn sort_univariate(panel: &ReturnPanel, signal: &ExposureMatrix, config: SortConfig) -> Result<SortResult> {
    config.validate()?;
    signal.check_grid(panel)?;
    let n = config.n_portfolios;
    let h = config.holding_months;
    let rows: Vec<Option<(Month, Formation)>> = formation_rows(panel, h)
        .into_par_iter()
        .map(|t| {
            let (members, rets, partial) = eligible(panel, t, h, signal, None);
            if members.len() < n {
                return Ok(None);
            }
            let sig: Vec<f64> = members.iter().map(|&i| signal.values[(t, i)]).collect();
            let ids: Vec<&str> = members.iter().map(|&i| panel.assets[i].as_str()).collect();
            let groups = assign_univariate(&sig, &ids, n);
            let w = weights(panel, t, &members, config.weighting)?;
            let (returns, signal, control) = group_stats(n, &groups, &rets, &w, &sig, &sig);
            Ok(Some((
                panel.dates[t],
                Formation {
                    returns,
                    signal,
                    control,
                    partial,
                },
            )))
        })
        .collect::<Result<_>>()?;
    finish(config, rows.into_iter().flatten().collect(), false)
}

/// Dependent double sort: control bins first, target bins within each, then
/// each target portfolio averages its sub-portfolios across control bins.
pub fn sort_bivariate_dependent(
    panel: &ReturnPanel,
    control: &ExposureMatrix,
    target: &ExposureMatrix,
    config: SortConfig,
) -> Result<SortResult> {
    config.validate()?;
    control.check_grid(panel)?;
    target.check_grid(panel)?;
    let n = config.n_portfolios;
    let h = config.holding_months;
    let rows: Vec<Option<(Month, Formation)>> = formation_rows(panel, h)
        .into_par_iter()
        .map(|t| {
            let (members, rets, partial) = eligible(panel, t, h, target, Some(control));
            let ctl: Vec<f64> = members.iter().map(|&i| control.values[(t, i)]).collect();
            let tgt: Vec<f64> = members.iter().map(|&i| target.values[(t, i)]).collect();
            let ids: Vec<&str> = members.iter().map(|&i| panel.assets[i].as_str()).collect();
            let Some(bins) = assign_dependent(&ctl, &tgt, &ids, n) else {
                return Ok(None);
            };
            let groups: Vec<usize> = bins.iter().map(|(c, k)| c * n + k).collect();
            let w = weights(panel, t, &members, config.weighting)?;
            let (r, s, c) = group_stats(n * n, &groups, &rets, &w, &tgt, &ctl);
            let collapse = |v: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|k| (0..n).map(|cb| v[cb * n + k]).sum::<f64>() / n as f64)
                    .collect()
            };
            Ok(Some((
                panel.dates[t],
                Formation {
                    returns: collapse(&r),
                    signal: collapse(&s),
                    control: collapse(&c),
                    partial,
                },
            )))
        })
        .collect::<Result<_>>()?;
    finish(config, rows.into_iter().flatten().collect(), true)
}

/// Annualized alpha (percent) and Newey-West t-statistic of a monthly return
/// series on the named factor columns.
pub fn alpha_regression(
    returns: &[f64],
    dates: &[Month],
    factors: &ObservedFactors,
    columns: &[String],
    nw_lags: usize,
) -> Result<(f64, f64)> {
    if returns.len() != dates.len() {
        return Err(Error::dimension("returns and dates differ in length"));
    }
    let cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| factors.aligned(c, dates))
        .collect::<Result<_>>()?;
    if cols.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::validation("factor data do not cover the return dates"));
    }
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let x = DesignMatrix::from_columns(&refs, true)?;
    let lags = nw_lags.min(returns.len().saturating_sub(1));
    let fit = newey_west(&x, returns, lags)?;
    Ok((fit.coefficients[0] * 12.0 * 100.0, fit.t_stats[0]))
}
