use nalgebra::DMatrix;

use super::ExposureMatrix;
use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::numerics::stats::average_ranks;

pub const DOWNSIDE_TAUS: [f64; 5] = [0.1, 0.15, 0.2, 0.3, 0.4];
pub const UPSIDE_TAUS: [f64; 5] = [0.6, 0.7, 0.8, 0.85, 0.9];
const MEDIAN_TAU: f64 = 0.5;

/// Relative exposures and rank-based downside/upside aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateBetas {
    pub dates: Vec<Month>,
    pub assets: Vec<String>,
    /// `beta(tau) - beta(0.5)` for every supplied tau except the median.
    pub relative: Vec<(f64, ExposureMatrix)>,
    pub down: ExposureMatrix,
    pub up: ExposureMatrix,
    pub down_rel: ExposureMatrix,
    pub up_rel: ExposureMatrix,
    /// (date, asset) pairs with some but not all required exposures.
    pub omitted: usize,
}

fn find<'a>(betas: &'a [(f64, &ExposureMatrix)], tau: f64) -> Result<&'a ExposureMatrix> {
    betas
        .iter()
        .find(|(t, _)| (t - tau).abs() < 1e-12)
        .map(|(_, m)| *m)
        .ok_or_else(|| Error::config(format!("exposures for tau = {tau} are required")))
}

/// Sum over `taus` of the cross-sectional rank transform `rank / (N_t + 1)`.
fn rank_sum(mats: &[DMatrix<f64>], rows: &[Vec<usize>], shape: (usize, usize)) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(shape.0, shape.1, f64::NAN);
    for (t, members) in rows.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let denom = members.len() as f64 + 1.0;
        for &i in members {
            out[(t, i)] = 0.0;
        }
        for m in mats {
            let vals: Vec<f64> = members.iter().map(|&i| m[(t, i)]).collect();
            for (k, r) in average_ranks(&vals).into_iter().enumerate() {
                out[(t, members[k])] += r / denom;
            }
        }
    }
    out
}

/// Builds relative exposures `beta(tau) - beta(0.5)` and the downside/upside
/// rank aggregates over [`DOWNSIDE_TAUS`] and [`UPSIDE_TAUS`]. An asset enters
/// a date only if every required tau is present.
pub fn aggregate_betas(betas: &[(f64, &ExposureMatrix)]) -> Result<AggregateBetas> {
    let median = find(betas, MEDIAN_TAU)?;
    let down: Vec<&ExposureMatrix> = DOWNSIDE_TAUS.iter().map(|&t| find(betas, t)).collect::<Result<_>>()?;
    let up: Vec<&ExposureMatrix> = UPSIDE_TAUS.iter().map(|&t| find(betas, t)).collect::<Result<_>>()?;
    for (_, m) in betas {
        if m.dates != median.dates || m.assets != median.assets {
            return Err(Error::dimension("exposure matrices are on different grids"));
        }
    }
    let shape = median.values.shape();
    let required: Vec<&ExposureMatrix> = down.iter().chain(&up).copied().chain([median]).collect();

    let mut omitted = 0;
    let rows: Vec<Vec<usize>> = (0..shape.0)
        .map(|t| {
            let mut members = Vec::new();
            for i in 0..shape.1 {
                let present = required.iter().filter(|m| !m.values[(t, i)].is_nan()).count();
                if present == required.len() {
                    members.push(i);
                } else if present > 0 {
                    omitted += 1;
                }
            }
            members
        })
        .collect();

    let rel = |m: &ExposureMatrix| -> DMatrix<f64> { &m.values - &median.values };
    let wrap = |values: DMatrix<f64>| ExposureMatrix {
        dates: median.dates.clone(),
        assets: median.assets.clone(),
        values,
    };
    let down_raw: Vec<DMatrix<f64>> = down.iter().map(|m| m.values.clone()).collect();
    let up_raw: Vec<DMatrix<f64>> = up.iter().map(|m| m.values.clone()).collect();
    let down_rel: Vec<DMatrix<f64>> = down.iter().map(|m| rel(m)).collect();
    let up_rel: Vec<DMatrix<f64>> = up.iter().map(|m| rel(m)).collect();

    let relative = betas
        .iter()
        .filter(|(t, _)| (t - MEDIAN_TAU).abs() >= 1e-12)
        .map(|(t, m)| (*t, wrap(rel(m))))
        .collect();
    Ok(AggregateBetas {
        dates: median.dates.clone(),
        assets: median.assets.clone(),
        relative,
        down: wrap(rank_sum(&down_raw, &rows, shape)),
        up: wrap(rank_sum(&up_raw, &rows, shape)),
        down_rel: wrap(rank_sum(&down_rel, &rows, shape)),
        up_rel: wrap(rank_sum(&up_rel, &rows, shape)),
        omitted,
    })
}
