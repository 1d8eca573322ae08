use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eval::{expanding_forecasts, oos_r2};
use crate::crosssection::{DOWNSIDE_TAUS, UPSIDE_TAUS};
use crate::error::{Error, Result};
use crate::numerics::stats::correlation;
use crate::numerics::{lambda_grid, loo_cv_tune, pca, simple_regression, DesignMatrix};

const GRID_SIZE: usize = 50;
const GRID_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "LASSO")]
    Lasso,
    #[serde(rename = "ENET")]
    Enet,
    #[serde(rename = "Combination")]
    Combination,
    #[serde(rename = "C-LASSO")]
    CLasso,
    #[serde(rename = "C-NET")]
    CNet,
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "OLS-selection")]
    OlsSelection,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Ols,
        ModelKind::Lasso,
        ModelKind::Enet,
        ModelKind::Combination,
        ModelKind::CLasso,
        ModelKind::CNet,
        ModelKind::Pca,
        ModelKind::OlsSelection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "OLS",
            ModelKind::Lasso => "LASSO",
            ModelKind::Enet => "ENET",
            ModelKind::Combination => "Combination",
            ModelKind::CLasso => "C-LASSO",
            ModelKind::CNet => "C-NET",
            ModelKind::Pca => "PCA",
            ModelKind::OlsSelection => "OLS-selection",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown forecast model '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauSet {
    All,
    Downside,
    Upside,
}

impl TauSet {
    pub const ALL: [TauSet; 3] = [TauSet::All, TauSet::Downside, TauSet::Upside];

    pub fn name(self) -> &'static str {
        match self {
            TauSet::All => "all",
            TauSet::Downside => "downside",
            TauSet::Upside => "upside",
        }
    }

    /// Required taus; `None` means every supplied column.
    pub fn taus(self) -> Option<&'static [f64]> {
        match self {
            TauSet::All => None,
            TauSet::Downside => Some(&DOWNSIDE_TAUS),
            TauSet::Upside => Some(&UPSIDE_TAUS),
        }
    }
}

impl fmt::Display for TauSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TauSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TauSet::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown tau set '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastModelSpec {
    pub kind: ModelKind,
    pub tau_set: TauSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationResult {
    pub spec: ForecastModelSpec,
    /// Forecasts of `y[first_window..]`.
    pub forecasts: Vec<f64>,
    pub r2_oos: f64,
    pub r2_oos_ct: f64,
}

fn select_columns<'a>(columns: &[(f64, &'a [f64])], set: TauSet) -> Result<Vec<(f64, &'a [f64])>> {
    let mut chosen: Vec<(f64, &[f64])> = match set.taus() {
        None => columns.to_vec(),
        Some(taus) => taus
            .iter()
            .map(|&t| {
                columns
                    .iter()
                    .find(|(c, _)| (c - t).abs() < 1e-12)
                    .copied()
                    .ok_or_else(|| Error::config(format!("predictor for tau = {t} is missing")))
            })
            .collect::<Result<_>>()?,
    };
    if chosen.is_empty() {
        return Err(Error::config("no predictors supplied"));
    }
    chosen.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(chosen)
}

fn regularized_forecast(x: &DMatrix<f64>, y: &[f64], row: &[f64], alpha: f64) -> Result<f64> {
    let dm = DesignMatrix::new(x.clone(), false)?;
    let grid = lambda_grid(&dm, y, alpha, GRID_SIZE, GRID_RATIO)?;
    Ok(loo_cv_tune(&dm, y, alpha, &grid)?.predict(row))
}

fn univariate_forecast(x: &[f64], y: &[f64], at: f64) -> f64 {
    match simple_regression(x, y) {
        Some((a, b)) => a + b * at,
        None => y.iter().sum::<f64>() / y.len() as f64,
    }
}

/// Out-of-sample evaluation of one multivariate forecasting model over the
/// predictors `(tau, series)` in `spec.tau_set`.
pub fn forecast_combination(
    y: &[f64],
    columns: &[(f64, &[f64])],
    spec: ForecastModelSpec,
    first_window: usize,
) -> Result<CombinationResult> {
    let cols = select_columns(columns, spec.tau_set)?;
    let n = y.len();
    if cols.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::dimension("predictor and return series differ in length"));
    }
    if first_window < 4 || first_window >= n {
        return Err(Error::domain(format!(
            "first estimation window {first_window} must lie in 4..{n}"
        )));
    }
    let series: Vec<&[f64]> = cols.iter().map(|(_, c)| *c).collect();
    let p = series.len();
    let xmat = DMatrix::from_fn(n, p, |t, j| series[j][t]);
    let row = |t: usize| -> Vec<f64> { (0..p).map(|j| xmat[(t, j)]).collect() };

    let univariate = |start: usize| -> Result<Vec<Vec<f64>>> {
        series
            .iter()
            .map(|s| expanding_forecasts(y, &[s], start))
            .collect()
    };

    let forecasts: Vec<f64> = match spec.kind {
        ModelKind::Ols => expanding_forecasts(y, &series, first_window)?,
        ModelKind::Lasso | ModelKind::Enet => {
            let alpha = if spec.kind == ModelKind::Lasso { 1.0 } else { 0.5 };
            (first_window..n)
                .map(|k| regularized_forecast(&xmat.rows(0, k).into_owned(), &y[..k], &row(k), alpha))
                .collect::<Result<_>>()?
        }
        ModelKind::Combination => {
            let u = univariate(first_window)?;
            (0..n - first_window)
                .map(|s| u.iter().map(|f| f[s]).sum::<f64>() / p as f64)
                .collect()
        }
        ModelKind::CLasso | ModelKind::CNet => {
            let alpha = if spec.kind == ModelKind::CLasso { 1.0 } else { 0.5 };
            // Univariate forecasts from half the first window onwards; each uses
            // only data before its own month, so none leak into later fits.
            let inner = first_window / 2;
            let u = univariate(inner)?;
            let umat = DMatrix::from_fn(n - inner, p, |s, j| u[j][s]);
            (first_window..n)
                .map(|k| {
                    let train = umat.rows(0, k - inner).into_owned();
                    let at: Vec<f64> = (0..p).map(|j| umat[(k - inner, j)]).collect();
                    regularized_forecast(&train, &y[inner..k], &at, alpha)
                })
                .collect::<Result<_>>()?
        }
        ModelKind::Pca if p == 1 => univariate(first_window)?.remove(0),
        ModelKind::Pca => (first_window..n)
            .map(|k| {
                let train = xmat.rows(0, k).into_owned();
                let pc = pca(&train, 1)?;
                let comp = pc.components.column(0);
                let score_at: f64 = (0..p).map(|j| (xmat[(k, j)] - pc.means[j]) * comp[j]).sum();
                let scores: Vec<f64> = pc.scores.column(0).iter().copied().collect();
                Ok(univariate_forecast(&scores, &y[..k], score_at))
            })
            .collect::<Result<_>>()?,
        ModelKind::OlsSelection => {
            let u = univariate(first_window)?;
            (first_window..n)
                .map(|k| {
                    let mut best = 0;
                    let mut best_r2 = f64::NEG_INFINITY;
                    for (j, s) in series.iter().enumerate() {
                        let c = correlation(&s[..k], &y[..k]);
                        let r2 = if c.is_finite() { c * c } else { 0.0 };
                        if r2 > best_r2 {
                            best = j;
                            best_r2 = r2;
                        }
                    }
                    u[best][k - first_window]
                })
                .collect()
        }
    };
    Ok(CombinationResult {
        spec,
        r2_oos: oos_r2(y, &forecasts, first_window, false)?,
        r2_oos_ct: oos_r2(y, &forecasts, first_window, true)?,
        forecasts,
    })
}
