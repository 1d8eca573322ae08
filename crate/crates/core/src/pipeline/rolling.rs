use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    align_diffs, estimate_betas, ewma_standardize, pca_sq_factor, residualize, BetaRow,
    ObservedFactors, ReturnPanel, WindowSpec, DEFAULT_RESIDUAL_FACTORS,
};
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::validate_tau;
use crate::qfa::{
    crossing_report, estimate_qfa, splice_factor, CrossingReport, FactorKey, FactorWindow,
    InitStrategy, QfaFit, RollingFactorSeries,
};

/// Settings of the rolling factor and exposure estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: WindowSpec,
    /// Strictly increasing quantile levels.
    pub taus: Vec<f64>,
    /// EWMA-standardize residuals before factor estimation.
    pub standardize: bool,
    pub ewma_lambda: f64,
    /// Observed factors removed from excess returns before factor estimation.
    pub residual_factors: Vec<String>,
    /// Observed factor columns whose exposures are estimated alongside the spliced factors.
    pub beta_controls: Vec<String>,
    pub estimate_betas: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            taus: vec![0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9],
            standardize: false,
            ewma_lambda: 0.94,
            residual_factors: DEFAULT_RESIDUAL_FACTORS.iter().map(|s| s.to_string()).collect(),
            beta_controls: Vec::new(),
            estimate_betas: true,
        }
    }
}

impl RollingConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.taus.is_empty() {
            return Err(Error::config("at least one tau is required"));
        }
        for &t in &self.taus {
            validate_tau(t).map_err(|e| e.context("taus"))?;
        }
        if self.taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("taus must be strictly increasing"));
        }
        if !(self.ewma_lambda > 0.0 && self.ewma_lambda < 1.0) {
            return Err(Error::config("ewma_lambda must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Spliced factor keys in output order: taus, then PCA-SQ.
    pub fn factor_keys(&self) -> Vec<FactorKey> {
        let mut keys: Vec<FactorKey> = self.taus.iter().map(|&t| FactorKey::Tau(t)).collect();
        keys.push(FactorKey::PcaSq);
        keys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingOutput {
    /// One series per key of [`RollingConfig::factor_keys`].
    pub series: Vec<RollingFactorSeries>,
    pub betas: Vec<BetaRow>,
    /// Quantile crossings summed over windows.
    pub crossing: CrossingReport,
}

impl RollingOutput {
    pub fn series_for(&self, key: &FactorKey) -> Option<&RollingFactorSeries> {
        self.series.iter().find(|s| &s.key == key)
    }
}

struct WindowEstimate {
    factors: Vec<FactorWindow>,
    crossing: CrossingReport,
}

fn estimate_window(
    panel: &ReturnPanel,
    factors: &ObservedFactors,
    config: &RollingConfig,
    start: Month,
) -> Result<WindowEstimate> {
    let len = config.window.length;
    let mut resid = residualize(panel, factors, start, len, &config.residual_factors, 2)?;
    if config.standardize {
        resid = ewma_standardize(&resid, config.ewma_lambda)?;
    }
    let fits: Vec<QfaFit> = config
        .taus
        .iter()
        .map(|&tau| estimate_qfa(&resid, tau, 1, InitStrategy::MultiStart))
        .collect::<Result<_>>()?;
    let crossing = crossing_report(&fits);
    let mut out: Vec<FactorWindow> = fits
        .iter()
        .map(|f| FactorWindow {
            dates: resid.dates.clone(),
            factor: f.factor(),
        })
        .collect();
    out.push(FactorWindow {
        dates: resid.dates.clone(),
        factor: pca_sq_factor(&resid)?,
    });
    Ok(WindowEstimate {
        factors: out,
        crossing,
    })
}

/// Window start months covered by both the panel and the factors.
pub fn window_starts(panel: &ReturnPanel, factors: &ObservedFactors, window: &WindowSpec) -> Vec<Month> {
    let first = panel.first_date().max(factors.dates[0]);
    let last = panel.last_date().min(*factors.dates.last().expect("nonempty factors"));
    let span = last.since(first) + 1;
    if span < window.length as i32 {
        return Vec::new();
    }
    let count = (span as usize - window.length) / window.step + 1;
    (0..count).map(|k| first.add((k * window.step) as i32)).collect()
}

/// Rolling-window factor estimation, splicing and exposure estimation.
pub fn run_rolling(panel: &ReturnPanel, factors: &ObservedFactors, config: &RollingConfig) -> Result<RollingOutput> {
    config.validate()?;
    let starts = window_starts(panel, factors, &config.window);
    if starts.is_empty() {
        return Err(Error::validation(format!(
            "data span is shorter than the {}-month window",
            config.window.length
        )));
    }
    let len = config.window.length as i32;
    let estimates: Vec<WindowEstimate> = starts
        .par_iter()
        .map(|&s| {
            estimate_window(panel, factors, config, s)
                .map_err(|e| e.context(format!("window ending {}", s.add(len - 1))))
        })
        .collect::<Result<_>>()?;

    let keys = config.factor_keys();
    let mut series = Vec::with_capacity(keys.len());
    for (k, key) in keys.iter().enumerate() {
        let windows: Vec<FactorWindow> = estimates.iter().map(|e| e.factors[k].clone()).collect();
        series.push(splice_factor(key.clone(), &windows)?);
    }
    let crossing = estimates.iter().fold(
        CrossingReport {
            curves: 0,
            violations: 0,
        },
        |acc, e| CrossingReport {
            curves: acc.curves + e.crossing.curves,
            violations: acc.violations + e.crossing.violations,
        },
    );

    let betas = if config.estimate_betas {
        let ends: Vec<Month> = starts.iter().map(|s| s.add(len - 1)).collect();
        rolling_betas(panel, factors, config, &series, &ends)?
    } else {
        Vec::new()
    };
    Ok(RollingOutput {
        series,
        betas,
        crossing,
    })
}

fn rolling_betas(
    panel: &ReturnPanel,
    factors: &ObservedFactors,
    config: &RollingConfig,
    series: &[RollingFactorSeries],
    ends: &[Month],
) -> Result<Vec<BetaRow>> {
    let rf = factors.aligned("rf", &panel.dates)?;
    let mut regressors: Vec<(FactorKey, Vec<f64>)> = series
        .iter()
        .map(|s| (s.key.clone(), align_diffs(s, &panel.dates)))
        .collect();
    for name in &config.beta_controls {
        regressors.push((FactorKey::Named(name.clone()), factors.aligned(name, &panel.dates)?));
    }
    let per_end: Vec<Vec<BetaRow>> = ends
        .par_iter()
        .map(|&end| {
            let mut rows = Vec::new();
            for (key, x) in &regressors {
                rows.extend(estimate_betas(panel, &rf, x, key, &config.window, end)?);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_end.into_iter().flatten().collect())
}
