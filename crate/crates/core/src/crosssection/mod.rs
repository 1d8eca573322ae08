//! Cross-sectional pricing tests of estimated exposures.
//!
//! Exposures are held as [`ExposureMatrix`] values aligned with a
//! [`ReturnPanel`](crate::pipeline::ReturnPanel): an exposure dated `t` is
//! paired with returns from `t + 1` onwards.

mod aggregate;
mod fm;
mod sorts;

pub use aggregate::{aggregate_betas, AggregateBetas, DOWNSIDE_TAUS, UPSIDE_TAUS};
pub use fm::{fama_macbeth, FmResult};
pub use sorts::{
    alpha_regression, assign_dependent, assign_univariate, sort_bivariate_dependent,
    sort_univariate, SortConfig, SortResult, Weighting,
};

use nalgebra::DMatrix;

use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::pipeline::{BetaRow, ReturnPanel};
use crate::qfa::FactorKey;

/// Exposures on the panel's date x asset grid; NaN where not estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureMatrix {
    pub dates: Vec<Month>,
    pub assets: Vec<String>,
    pub values: DMatrix<f64>,
}

impl ExposureMatrix {
    pub fn new(dates: Vec<Month>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != (dates.len(), assets.len()) {
            return Err(Error::dimension("exposure matrix does not match dates x assets"));
        }
        Ok(Self { dates, assets, values })
    }

    /// Rows of `key` from a beta table placed on the panel grid.
    pub fn from_rows(rows: &[BetaRow], key: &FactorKey, panel: &ReturnPanel) -> Self {
        let mut values = DMatrix::from_element(panel.n_dates(), panel.n_assets(), f64::NAN);
        let col: std::collections::HashMap<&str, usize> = panel
            .assets
            .iter()
            .enumerate()
            .map(|(j, a)| (a.as_str(), j))
            .collect();
        for r in rows.iter().filter(|r| &r.key == key) {
            if let (Some(t), Some(&j)) = (panel.date_index(r.window_end), col.get(r.asset.as_str())) {
                values[(t, j)] = r.beta;
            }
        }
        Self {
            dates: panel.dates.clone(),
            assets: panel.assets.clone(),
            values,
        }
    }

    pub(crate) fn check_grid(&self, panel: &ReturnPanel) -> Result<()> {
        if self.dates != panel.dates || self.assets != panel.assets {
            return Err(Error::dimension("exposures are not on the panel's date x asset grid"));
        }
        Ok(())
    }
}
