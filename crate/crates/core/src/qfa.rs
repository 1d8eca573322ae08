//! Quantile factor analysis by iterative quantile regression.
//!
//! For a fixed quantile level and factor count the estimator alternates between
//! per-asset regressions (loadings given factors) and per-date regressions
//! (factors given loadings), both solved exactly under the check loss, and then
//! rotates the pair so that `F'F / T = I` and `G'G / N` is diagonal with
//! non-increasing entries. Rotation leaves the fitted quantiles unchanged, so
//! the recorded objective never increases.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::{
    crossing_count, monotone_rearrange, pca, quantile_regression, rho, scalar_quantile_fit,
    stats, validate_tau, DesignMatrix,
};

const MAX_OUTER_ITER: usize = 100;
const REL_TOL: f64 = 1e-8;

/// Complete T x N panel of idiosyncratic returns (dates in rows, assets in columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    pub dates: Vec<Month>,
    pub assets: Vec<String>,
    pub values: DMatrix<f64>,
}

impl ResidualPanel {
    pub fn new(dates: Vec<Month>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != assets.len() {
            return Err(Error::dimension(format!(
                "panel is {}x{} but has {} dates and {} assets",
                values.nrows(),
                values.ncols(),
                dates.len(),
                assets.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("residual panel must be complete and finite"));
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    /// Panel with synthetic labels, for simulated data.
    pub fn unlabeled(values: DMatrix<f64>) -> Self {
        let start = Month::new(2000, 1).expect("valid month");
        let dates = start.range(values.nrows());
        let assets = (0..values.ncols()).map(|i| format!("A{i:05}")).collect();
        Self {
            dates,
            assets,
            values,
        }
    }

    pub fn n_dates(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps the listed asset columns, in the given order.
    pub fn select_assets(&self, columns: &[usize]) -> Self {
        Self {
            dates: self.dates.clone(),
            assets: columns.iter().map(|&j| self.assets[j].clone()).collect(),
            values: self.values.select_columns(columns.iter()),
        }
    }
}

/// How the factors are initialized before the first loading update.
#[derive(Debug, Clone, Default)]
pub enum InitStrategy {
    /// Leading principal component scores of the panel.
    Pca,
    /// Cross-sectional tau-quantile of each date as the first factor, leading
    /// principal component scores for the rest.
    RowQuantile,
    /// Runs both `Pca` and `RowQuantile` and keeps the fit with the lower
    /// objective (ties go to `Pca`).
    #[default]
    MultiStart,
    /// Explicit T x r starting factors.
    Factors(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfaFit {
    pub tau: f64,
    /// T x r, normalized so that `F'F / T = I`.
    pub factors: DMatrix<f64>,
    /// N x r, with `G'G / N` diagonal and non-increasing.
    pub loadings: DMatrix<f64>,
    /// Mean check loss at the returned fit.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean check loss after every outer iteration (first entry: initial loading fit).
    pub objective_path: Vec<f64>,
}

impl QfaFit {
    /// Fitted tau-quantiles, T x N.
    pub fn fitted(&self) -> DMatrix<f64> {
        &self.factors * self.loadings.transpose()
    }

    /// First factor as a plain series.
    pub fn factor(&self) -> Vec<f64> {
        self.factors.column(0).iter().copied().collect()
    }
}

/// Estimates an r-factor quantile factor model of `panel` at quantile `tau`.
pub fn estimate_qfa(panel: &ResidualPanel, tau: f64, r: usize, init: InitStrategy) -> Result<QfaFit> {
    validate_tau(tau)?;
    let x = &panel.values;
    let (t_len, n) = x.shape();
    if r == 0 {
        return Err(Error::dimension("factor count must be at least 1"));
    }
    if r >= n.min(t_len) {
        return Err(Error::dimension(format!(
            "{r} factors need more than {r} dates and assets (panel is {t_len}x{n})"
        )));
    }

    if x.iter().all(|&v| v == 0.0) {
        // Every loading is zero at the optimum; factors are only pinned by normalization.
        let scale = (t_len as f64).sqrt();
        let factors = DMatrix::from_fn(t_len, r, |i, j| if i == j { scale } else { 0.0 });
        return Ok(QfaFit {
            tau,
            factors,
            loadings: DMatrix::zeros(n, r),
            objective: 0.0,
            iterations: 0,
            converged: true,
            objective_path: vec![0.0],
        });
    }
    for (j, col) in x.column_iter().enumerate() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::domain(format!(
                "asset '{}' has zero variance in the panel",
                panel.assets[j]
            )));
        }
    }

    match init {
        InitStrategy::Pca => iterate(x, pca(x, r)?.scores, tau),
        InitStrategy::RowQuantile => iterate(x, row_quantile_start(x, r, tau)?, tau),
        InitStrategy::MultiStart => {
            let a = iterate(x, pca(x, r)?.scores, tau)?;
            match row_quantile_start(x, r, tau).and_then(|f| iterate(x, f, tau)) {
                Ok(b) if b.objective < a.objective => Ok(b),
                _ => Ok(a),
            }
        }
        InitStrategy::Factors(f) => {
            if f.shape() != (t_len, r) {
                return Err(Error::dimension("initial factors must be T x r"));
            }
            iterate(x, f, tau)
        }
    }
}

fn row_quantile_start(x: &DMatrix<f64>, r: usize, tau: f64) -> Result<DMatrix<f64>> {
    let (t_len, n) = x.shape();
    let ones = vec![1.0; n];
    let mut f = DMatrix::zeros(t_len, r);
    for t in 0..t_len {
        let row: Vec<f64> = x.row(t).iter().copied().collect();
        f[(t, 0)] = scalar_quantile_fit(&ones, &row, tau);
    }
    if r > 1 {
        let scores = pca(x, r - 1)?.scores;
        f.columns_mut(1, r - 1).copy_from(&scores);
    }
    Ok(f)
}

fn iterate(x: &DMatrix<f64>, mut factors: DMatrix<f64>, tau: f64) -> Result<QfaFit> {
    standardize_factors(&mut factors)?;

    let mut path = Vec::new();
    let mut loadings = update_loadings(x, &factors, tau)?;
    path.push(objective(x, &factors, &loadings, tau));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_OUTER_ITER {
        iterations += 1;
        if iterations > 1 {
            loadings = update_loadings(x, &factors, tau)?;
        }
        factors = update_factors(x, &loadings, tau)?;
        normalize(&mut factors, &mut loadings)?;
        let obj = objective(x, &factors, &loadings, tau);
        let prev = *path.last().expect("nonempty");
        path.push(obj);
        if obj == 0.0 || (prev - obj) <= REL_TOL * prev {
            converged = true;
            break;
        }
    }
    let objective = *path.last().expect("nonempty");
    Ok(QfaFit {
        tau,
        factors,
        loadings,
        objective,
        iterations,
        converged,
        objective_path: path,
    })
}

fn objective(x: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>, tau: f64) -> f64 {
    let fitted = f * g.transpose();
    let total: f64 = x.iter().zip(fitted.iter()).map(|(a, b)| rho(a - b, tau)).sum();
    total / x.len() as f64
}

/// Regress a response on the columns of `design` (no intercept) under the check loss.
fn row_fit(design: &DMatrix<f64>, response: &[f64], tau: f64) -> Result<Vec<f64>> {
    if design.ncols() == 1 {
        return Ok(vec![scalar_quantile_fit(design.as_slice(), response, tau)]);
    }
    let dm = DesignMatrix::new(design.clone(), false)?;
    Ok(quantile_regression(&dm, response, tau)?
        .coefficients
        .iter()
        .copied()
        .collect())
}

fn update_loadings(x: &DMatrix<f64>, f: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let (_, n) = x.shape();
    let r = f.ncols();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| row_fit(f, x.column(i).as_slice(), tau))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, r, |i, j| rows[i][j]))
}

fn update_factors(x: &DMatrix<f64>, g: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let (t_len, _) = x.shape();
    let r = g.ncols();
    let xt = x.transpose();
    let rows: Vec<Vec<f64>> = (0..t_len)
        .into_par_iter()
        .map(|t| row_fit(g, xt.column(t).as_slice(), tau))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(t_len, r, |t, j| rows[t][j]))
}

fn standardize_factors(f: &mut DMatrix<f64>) -> Result<()> {
    let t_len = f.nrows() as f64;
    let s = f.transpose() * &*f / t_len;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::domain("initial factors are degenerate"))?;
    let l_inv_t = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::domain("initial factors are degenerate"))?
        .transpose();
    *f = &*f * l_inv_t;
    Ok(())
}

/// Rotates `(F, G)` without changing `F G'` so that `F'F/T = I` and `G'G/N` is
/// diagonal with non-increasing entries; each loading column gets a nonnegative mean.
pub fn normalize(f: &mut DMatrix<f64>, g: &mut DMatrix<f64>) -> Result<()> {
    let t_len = f.nrows() as f64;
    let n = g.nrows() as f64;
    let s = f.transpose() * &*f / t_len;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::domain("factor estimate collapsed to a degenerate series"))?;
    let l = chol.l();
    let l_inv_t = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::domain("factor estimate collapsed to a degenerate series"))?
        .transpose();
    let f1 = &*f * l_inv_t;
    let g1 = &*g * l;

    let m = g1.transpose() * &g1 / n;
    let r = m.nrows();
    let (u, _) = if r == 1 {
        (DMatrix::from_element(1, 1, 1.0), ())
    } else {
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        (eig.eigenvectors.select_columns(order.iter()), ())
    };
    let mut f2 = f1 * &u;
    let mut g2 = g1 * &u;
    for c in 0..r {
        let sum = g2.column(c).sum();
        let flip = if sum != 0.0 { sum < 0.0 } else { g2[(0, c)] < 0.0 };
        if flip {
            f2.column_mut(c).neg_mut();
            g2.column_mut(c).neg_mut();
        }
    }
    *f = f2;
    *g = g2;
    Ok(())
}

/// Monotonicity of fitted quantiles across a set of tau fits on one panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingReport {
    /// Number of (date, asset) quantile curves examined.
    pub curves: usize,
    /// Curves with at least one decrease in tau.
    pub violations: usize,
}

/// Counts quantile crossings; `fits` must share one panel and be sorted by tau.
pub fn crossing_report(fits: &[QfaFit]) -> CrossingReport {
    let curves = quantile_curves(fits);
    let violations = curves.iter().filter(|c| crossing_count(c) > 0).count();
    CrossingReport {
        curves: curves.len(),
        violations,
    }
}

/// Fitted quantiles per tau after monotone rearrangement of each (date, asset) curve.
pub fn rearranged_quantiles(fits: &[QfaFit]) -> Vec<DMatrix<f64>> {
    let Some(first) = fits.first() else {
        return Vec::new();
    };
    let (t_len, n) = (first.factors.nrows(), first.loadings.nrows());
    let curves = quantile_curves(fits);
    let mut out = vec![DMatrix::zeros(t_len, n); fits.len()];
    for (idx, curve) in curves.iter().enumerate() {
        let (t, i) = (idx / n, idx % n);
        for (k, v) in monotone_rearrange(curve).into_iter().enumerate() {
            out[k][(t, i)] = v;
        }
    }
    out
}

fn quantile_curves(fits: &[QfaFit]) -> Vec<Vec<f64>> {
    let Some(first) = fits.first() else {
        return Vec::new();
    };
    let (t_len, n) = (first.factors.nrows(), first.loadings.nrows());
    let fitted: Vec<DMatrix<f64>> = fits.iter().map(QfaFit::fitted).collect();
    (0..t_len * n)
        .map(|idx| fitted.iter().map(|m| m[(idx / n, idx % n)]).collect())
        .collect()
}

/// Label of a spliced factor or exposure column.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKey {
    Tau(f64),
    PcaSq,
    Named(String),
}

impl fmt::Display for FactorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKey::Tau(t) => write!(f, "{t}"),
            FactorKey::PcaSq => f.write_str("PCASQ"),
            FactorKey::Named(s) => f.write_str(s),
        }
    }
}

impl FromStr for FactorKey {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "PCASQ" {
            return Ok(FactorKey::PcaSq);
        }
        match s.parse::<f64>() {
            Ok(t) if t > 0.0 && t < 1.0 => Ok(FactorKey::Tau(t)),
            _ => Ok(FactorKey::Named(s.to_string())),
        }
    }
}

/// One rolling-window estimate of a single factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorWindow {
    pub dates: Vec<Month>,
    pub factor: Vec<f64>,
}

impl FactorWindow {
    pub fn end(&self) -> Month {
        *self.dates.last().expect("window has dates")
    }
}

/// Series built from the last factor value of each rolling window.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingFactorSeries {
    pub key: FactorKey,
    /// Window end dates, one per level.
    pub dates: Vec<Month>,
    pub levels: Vec<f64>,
    /// First differences of `levels`, dated `dates[1..]`.
    pub diffs: Vec<f64>,
    /// Windows whose sign was flipped to agree with the preceding window.
    pub flips: usize,
}

impl RollingFactorSeries {
    pub fn diff_dates(&self) -> &[Month] {
        self.dates.get(1..).unwrap_or(&[])
    }

    /// Difference dated `m`, if any.
    pub fn diff_at(&self, m: Month) -> Option<f64> {
        let first = *self.dates.first()?;
        let k = m.since(first);
        if k < 1 {
            return None;
        }
        let k = k as usize;
        (k < self.dates.len() && self.dates[k] == m).then(|| self.diffs[k - 1])
    }
}

/// Splices rolling windows (ordered by end date) into one level series.
///
/// Each window's factor is first sign-aligned to have a nonnegative correlation
/// with the previous (aligned) window over their common dates.
pub fn splice_factor(key: FactorKey, windows: &[FactorWindow]) -> Result<RollingFactorSeries> {
    if windows.is_empty() {
        return Err(Error::domain("no windows to splice"));
    }
    for w in windows {
        if w.dates.is_empty() || w.dates.len() != w.factor.len() {
            return Err(Error::dimension("window dates and factor lengths differ"));
        }
    }
    if windows.windows(2).any(|p| p[1].end() <= p[0].end()) {
        return Err(Error::validation("windows must be ordered by end date"));
    }
    let mut flips = 0;
    let mut prev: Option<FactorWindow> = None;
    let mut dates = Vec::with_capacity(windows.len());
    let mut levels = Vec::with_capacity(windows.len());
    for w in windows {
        let mut current = w.clone();
        if let Some(p) = &prev {
            if overlap_correlation(p, &current) < 0.0 {
                current.factor.iter_mut().for_each(|v| *v = -*v);
                flips += 1;
            }
        }
        dates.push(current.end());
        levels.push(*current.factor.last().expect("nonempty"));
        prev = Some(current);
    }
    let diffs = stats::diff(&levels);
    Ok(RollingFactorSeries {
        key,
        dates,
        levels,
        diffs,
        flips,
    })
}

/// Correlation of two windows over their common dates; 0 when undefined.
pub fn overlap_correlation(a: &FactorWindow, b: &FactorWindow) -> f64 {
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    let mut j = 0;
    for (i, d) in a.dates.iter().enumerate() {
        while j < b.dates.len() && b.dates[j] < *d {
            j += 1;
        }
        if j < b.dates.len() && b.dates[j] == *d {
            xa.push(a.factor[i]);
            xb.push(b.factor[j]);
        }
    }
    let c = stats::correlation(&xa, &xb);
    if c.is_finite() {
        c
    } else {
        0.0
    }
}
