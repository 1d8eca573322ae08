use nalgebra::{DMatrix, DVector};

use super::DesignMatrix;
use crate::error::{Error, Result};

/// Smallest admissible squared Cholesky pivot of the unit-diagonal Gram matrix,
/// i.e. `1 - R^2` of a column regressed on the preceding ones.
const RANK_TOLERANCE: f64 = 1e-11;

/// Factorized normal equations `X'X` with the column scaling used for the rank test.
pub(crate) struct NormalEquations {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    scale: DVector<f64>,
}

impl NormalEquations {
    pub(crate) fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = x.shape();
        if n < k {
            return Err(Error::singular(format!(
                "{n} observations cannot identify {k} coefficients"
            )));
        }
        let gram = x.transpose() * x;
        let mut scale = DVector::zeros(k);
        for j in 0..k {
            let d = gram[(j, j)];
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::singular(format!("column {j} is identically zero")));
            }
            scale[j] = 1.0 / d.sqrt();
        }
        let scaled = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] * scale[i] * scale[j]);
        let chol = scaled
            .cholesky()
            .ok_or_else(|| Error::singular("design is rank deficient"))?;
        let l = chol.l_dirty();
        for j in 0..k {
            if l[(j, j)] * l[(j, j)] < RANK_TOLERANCE {
                return Err(Error::singular(format!(
                    "column {j} is collinear with preceding columns"
                )));
            }
        }
        Ok(Self { chol, scale })
    }

    /// Solves `X'X b = rhs`.
    pub(crate) fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let scaled_rhs = rhs.component_mul(&self.scale);
        self.chol.solve(&scaled_rhs).component_mul(&self.scale)
    }

    /// `(X'X)^{-1}`.
    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        let k = self.scale.len();
        DMatrix::from_fn(k, k, |i, j| inv[(i, j)] * self.scale[i] * self.scale[j])
    }
}

/// Least-squares coefficients from the normal equations.
pub fn ols(x: &DesignMatrix, y: &[f64]) -> Result<DVector<f64>> {
    x.check_response(y)?;
    let ne = NormalEquations::new(x.values())?;
    let xty = x.values().transpose() * DVector::from_column_slice(y);
    Ok(ne.solve(&xty))
}

/// Coefficients and residuals of a least-squares fit.
pub fn ols_with_residuals(x: &DesignMatrix, y: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    let beta = ols(x, y)?;
    let resid = DVector::from_column_slice(y) - x.fitted(&beta);
    Ok((beta, resid))
}

/// Slope and intercept of a simple regression of `y` on `x` over paired observations.
/// Returns `None` when `x` has no variation.
pub fn simple_regression(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_recovers_constant() {
        let x = DesignMatrix::intercept_only(3);
        let b = ols(&x, &[3.0, 3.0, 3.0]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_points_interpolated() {
        let x = DesignMatrix::from_columns(&[&[0.0, 1.0]], true).unwrap();
        let b = ols(&x, &[0.0, 2.0]).unwrap();
        assert!(b[0].abs() < 1e-14);
        assert!((b[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_columns_rejected() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [0.5, 1.0, 1.5, 2.0];
        let x = DesignMatrix::from_columns(&[&a, &b], true).unwrap();
        assert!(matches!(ols(&x, &[1.0, 0.0, 1.0, 2.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn constant_regressor_collinear_with_intercept() {
        let x = DesignMatrix::from_columns(&[&[2.0, 2.0, 2.0]], true).unwrap();
        assert!(matches!(ols(&x, &[1.0, 2.0, 3.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn too_few_rows() {
        let x = DesignMatrix::from_columns(&[&[1.0]], true).unwrap();
        assert!(ols(&x, &[1.0]).is_err());
    }

    #[test]
    fn simple_regression_matches_ols() {
        let xs = [0.3, -1.2, 2.5, 0.7, 1.1];
        let ys = [1.0, -0.4, 2.2, 0.1, 0.9];
        let (a, b) = simple_regression(&xs, &ys).unwrap();
        let full = ols(&DesignMatrix::from_columns(&[&xs], true).unwrap(), &ys).unwrap();
        assert!((a - full[0]).abs() < 1e-12 && (b - full[1]).abs() < 1e-12);
    }
}
