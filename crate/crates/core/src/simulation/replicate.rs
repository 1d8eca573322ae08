use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{simulate_panel, SimSpec};
use crate::crosssection::assign_univariate;
use crate::error::{Error, Result};
use crate::numerics::stats::{diff, mean, std_dev};
use crate::numerics::{newey_west, simple_regression, validate_tau, DesignMatrix, NormalEquations};
use crate::pipeline::pca_sq_factor;
use crate::qfa::{estimate_qfa, FactorKey, InitStrategy, ResidualPanel};

const N_PORTFOLIOS: usize = 10;
const CRITICAL_T: f64 = 1.96;

/// Premia of one simulated panel, one entry per key (taus, then PCA-SQ).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// Annualized decile H-L spread in mean returns, percent.
    pub premia: Vec<f64>,
    /// Cross-sectional slope t-statistic on the exposure.
    pub t_stats: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumRow {
    pub key: FactorKey,
    /// Mean H-L premium across replications, annualized percent.
    pub premium: f64,
    /// Mean over standard deviation of the premium across replications.
    pub t_stat: f64,
    /// Share of replications whose cross-sectional |t| exceeds 1.96.
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumTable {
    pub rows: Vec<PremiumRow>,
    pub n_reps: usize,
}

fn residuals_on_mean_factor(returns: &DMatrix<f64>) -> Result<(ResidualPanel, Vec<f64>)> {
    let (t_len, n) = returns.shape();
    let f: Vec<f64> = (0..t_len).map(|t| returns.row(t).sum() / n as f64).collect();
    let x = DMatrix::from_fn(t_len, 2, |t, j| if j == 0 { 1.0 } else { f[t] });
    let ne = NormalEquations::new(&x)?;
    let mut values = DMatrix::zeros(t_len, n);
    for i in 0..n {
        let y = returns.column(i).into_owned();
        let b = ne.solve(&(x.transpose() * &y));
        values.set_column(i, &(&y - &x * b));
    }
    Ok((ResidualPanel::unlabeled(values), f))
}

/// Slopes of every asset's return on `x`, where `x[k]` pairs with return row `offset + k`.
fn slopes(returns: &DMatrix<f64>, x: &[f64], offset: usize) -> Vec<f64> {
    (0..returns.ncols())
        .map(|i| {
            let y: Vec<f64> = (0..x.len()).map(|k| returns[(offset + k, i)]).collect();
            simple_regression(x, &y).map_or(0.0, |(_, b)| b)
        })
        .collect()
}

fn hl_premium(exposure: &[f64], mean_returns: &[f64], ids: &[&str]) -> f64 {
    let groups = assign_univariate(exposure, ids, N_PORTFOLIOS);
    let avg = |g: usize| {
        let v: Vec<f64> = (0..groups.len())
            .filter(|&i| groups[i] == g)
            .map(|i| mean_returns[i])
            .collect();
        mean(&v)
    };
    (avg(N_PORTFOLIOS - 1) - avg(0)) * 12.0 * 100.0
}

fn cross_sectional_t(mean_returns: &[f64], exposure: &[f64], market: &[f64]) -> Result<f64> {
    let x = DesignMatrix::from_columns(&[exposure, market], true)?;
    let fit = newey_west(&x, mean_returns, 0)?;
    Ok(fit.t_stats[1])
}

/// Premia of replication `rep`: exposures to each quantile factor and to PCA-SQ
/// estimated from one simulated panel.
pub fn simulate_replication(spec: &SimSpec, taus: &[f64], rep: u64) -> Result<ReplicationOutcome> {
    let mut rng = spec.rng_for(rep);
    let draw = simulate_panel(spec, &mut rng)?;
    let returns = &draw.returns;
    let n = returns.ncols();
    if n < N_PORTFOLIOS || returns.nrows() < 4 {
        return Err(Error::domain("simulated panel is too small for decile sorts"));
    }
    let (resid, f) = residuals_on_mean_factor(returns)?;
    let market_beta = slopes(returns, &f, 0);
    let mean_returns: Vec<f64> = (0..n).map(|i| returns.column(i).mean()).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("{i:06}")).collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();

    let mut factors = Vec::with_capacity(taus.len() + 1);
    for &tau in taus {
        factors.push(estimate_qfa(&resid, tau, 1, InitStrategy::MultiStart)?.factor());
    }
    factors.push(pca_sq_factor(&resid)?);

    let mut premia = Vec::with_capacity(factors.len());
    let mut t_stats = Vec::with_capacity(factors.len());
    for level in &factors {
        let exposure = slopes(returns, &diff(level), 1);
        premia.push(hl_premium(&exposure, &mean_returns, &id_refs));
        t_stats.push(cross_sectional_t(&mean_returns, &exposure, &market_beta)?);
    }
    Ok(ReplicationOutcome { premia, t_stats })
}

/// Runs `spec.n_reps` independent replications in parallel and summarizes the
/// premia per quantile level and for PCA-SQ.
pub fn replicate_premium_table(spec: &SimSpec, taus: &[f64]) -> Result<PremiumTable> {
    spec.validate()?;
    for &t in taus {
        validate_tau(t)?;
    }
    let outcomes: Vec<ReplicationOutcome> = (0..spec.n_reps as u64)
        .into_par_iter()
        .map(|rep| simulate_replication(spec, taus, rep).map_err(|e| e.context(format!("replication {rep}"))))
        .collect::<Result<_>>()?;
    let mut keys: Vec<FactorKey> = taus.iter().map(|&t| FactorKey::Tau(t)).collect();
    keys.push(FactorKey::PcaSq);
    let reps = outcomes.len() as f64;
    let rows = keys
        .into_iter()
        .enumerate()
        .map(|(k, key)| {
            let p: Vec<f64> = outcomes.iter().map(|o| o.premia[k]).collect();
            let rejections = outcomes.iter().filter(|o| o.t_stats[k].abs() > CRITICAL_T).count();
            let m = mean(&p);
            let sd = std_dev(&p);
            PremiumRow {
                key,
                premium: m,
                t_stat: if sd > 0.0 { m / sd } else { f64::NAN },
                rejection_rate: rejections as f64 / reps,
            }
        })
        .collect();
    Ok(PremiumTable {
        rows,
        n_reps: outcomes.len(),
    })
}
