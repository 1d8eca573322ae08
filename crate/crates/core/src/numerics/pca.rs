use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Leading principal components of a column-demeaned data matrix.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Loading vectors, one unit-norm column per component (cols x k).
    pub components: DMatrix<f64>,
    /// Component series, one column per component (rows x k).
    pub scores: DMatrix<f64>,
    /// Variance of each score series (divisor = rows), non-increasing.
    pub explained_variance: Vec<f64>,
    /// Column means removed before the decomposition.
    pub means: DVector<f64>,
}

/// Principal components of the rows of `x` (observations) across its columns (variables).
///
/// Each component is sign-fixed so its loading vector has a nonnegative mean;
/// an exactly zero mean falls back to a nonnegative first loading.
pub fn pca(x: &DMatrix<f64>, k: usize) -> Result<PcaResult> {
    let (n, p) = x.shape();
    if k == 0 || k > n.min(p) {
        return Err(Error::dimension(format!(
            "cannot extract {k} components from a {n}x{p} matrix"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("pca input contains non-finite entries"));
    }
    let means = DVector::from_fn(p, |j, _| x.column(j).mean());
    let mut centered = x.clone();
    for j in 0..p {
        let m = means[j];
        centered.column_mut(j).add_scalar_mut(-m);
    }

    // Decompose whichever Gram matrix is smaller.
    let (vals, vecs, via_rows) = if n < p {
        let g = &centered * centered.transpose();
        let eig = SymmetricEigen::new(g);
        (eig.eigenvalues, eig.eigenvectors, true)
    } else {
        let g = centered.transpose() * &centered;
        let eig = SymmetricEigen::new(g);
        (eig.eigenvalues, eig.eigenvectors, false)
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));

    let top = vals[order[0]].max(0.0);
    let floor = top * 1e-12 * (n.max(p) as f64);
    if vals[order[k - 1]] <= floor {
        return Err(Error::dimension(format!(
            "matrix rank is below the {k} requested components"
        )));
    }

    let mut components = DMatrix::zeros(p, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut v = if via_rows {
            // Loadings from left singular vectors: X'u / sigma.
            let u = vecs.column(idx);
            let mut v = centered.transpose() * u;
            let norm = v.norm();
            v /= norm;
            v
        } else {
            vecs.column(idx).into_owned()
        };
        fix_sign(&mut v);
        components.set_column(c, &v);
    }
    let scores = &centered * &components;
    let explained_variance = (0..k)
        .map(|c| scores.column(c).norm_squared() / n as f64)
        .collect();
    Ok(PcaResult {
        components,
        scores,
        explained_variance,
        means,
    })
}

fn fix_sign(v: &mut DVector<f64>) {
    let sum: f64 = v.iter().sum();
    let flip = if sum != 0.0 { sum < 0.0 } else { v[0] < 0.0 };
    if flip {
        v.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_recovers_direction() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -1.5, 0.2]);
        let v = DVector::from_vec(vec![0.3, 1.0, 0.7, 0.9]);
        let x = &u * v.transpose();
        let res = pca(&x, 1).unwrap();
        let s = res.scores.column(0);
        let uc = &u - DVector::from_element(6, u.mean());
        let corr = s.dot(&uc) / (s.norm() * uc.norm());
        assert!((corr.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_limit_enforced() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = DVector::from_vec(vec![0.3, 1.0, 0.7]);
        let x = &u * v.transpose();
        assert!(matches!(pca(&x, 2), Err(Error::Dimension(_))));
        assert!(matches!(pca(&x, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn loading_mean_nonnegative() {
        let x = DMatrix::from_fn(30, 8, |i, j| ((i * 7 + j * 3) % 11) as f64 - (j as f64) * ((i % 5) as f64));
        let res = pca(&x, 3).unwrap();
        for c in 0..3 {
            assert!(res.components.column(c).sum() >= 0.0);
        }
    }
}
