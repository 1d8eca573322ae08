use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A dense regressor matrix, one row per observation.
///
/// When `intercept_included` is set the first column is the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    intercept_included: bool,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, intercept_included: bool) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("design matrix contains non-finite entries"));
        }
        if intercept_included && values.ncols() == 0 {
            return Err(Error::dimension("intercept flagged on an empty design"));
        }
        Ok(Self {
            values,
            intercept_included,
        })
    }

    /// Prepends a constant column to `regressors`.
    pub fn with_intercept(regressors: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = regressors.shape();
        let mut values = DMatrix::from_element(n, k + 1, 1.0);
        values.columns_mut(1, k).copy_from(regressors);
        Self::new(values, true)
    }

    /// Constant column followed by the given series as columns.
    pub fn from_columns(columns: &[&[f64]], intercept: bool) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::dimension("columns of unequal length"));
        }
        let offset = usize::from(intercept);
        let mut values = DMatrix::from_element(n, columns.len() + offset, 1.0);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[(i, j + offset)] = v;
            }
        }
        Self::new(values, intercept)
    }

    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: DMatrix::from_element(n, 1, 1.0),
            intercept_included: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn intercept_included(&self) -> bool {
        self.intercept_included
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn fitted(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.values * coefficients
    }

    pub(crate) fn check_response(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.rows() {
            return Err(Error::dimension(format!(
                "response has {} observations, design has {}",
                y.len(),
                self.rows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("response contains non-finite entries"));
        }
        Ok(())
    }
}
