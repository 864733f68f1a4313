//! Least-squares helpers shared by the trend, shock and projection code.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub n_obs: usize,
}

/// Ordinary least squares of `y` on the columns of `x`.
///
/// Fails when `x` does not have full column rank or there are no more rows
/// than columns.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} regressors"
        )));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "design condition number exceeds {:.0e}",
            1.0 / RANK_TOL
        )));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(fit_from(x, &yv, beta))
}

/// Least squares that tolerates collinear columns (minimum-norm solution).
///
/// Residuals are unique even when the coefficients are not, which is all the
/// forecast-error computations need.
pub fn ols_min_norm(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} regressors"
        )));
    }
    let svd = x.clone().svd(true, true);
    let eps = RANK_TOL * svd.singular_values.max();
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, eps)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(fit_from(x, &yv, beta))
}

fn fit_from(x: &DMatrix<f64>, y: &DVector<f64>, beta: DVector<f64>) -> OlsFit {
    let fitted = x * &beta;
    let residuals = y - &fitted;
    OlsFit {
        coefficients: beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        n_obs: x.nrows(),
    }
}

/// Cholesky factor of a symmetric positive definite matrix after scaling it
/// to unit diagonal. A pivot below `tol` on the scaled matrix means the
/// underlying columns are (numerically) collinear; the offending column index
/// is reported.
#[derive(Debug, Clone)]
pub struct ScaledCholesky {
    n: usize,
    scale: Vec<f64>,
    /// row-major lower triangle, row i holds entries 0..=i
    lower: Vec<f64>,
}

impl ScaledCholesky {
    pub fn new(a: &DMatrix<f64>, tol: f64) -> std::result::Result<Self, usize> {
        let n = a.nrows();
        let mut scale = vec![0.0; n];
        for i in 0..n {
            let d = a[(i, i)];
            if !(d > 0.0) {
                return Err(i);
            }
            scale[i] = 1.0 / d.sqrt();
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let s = a[(i, j)] * scale[i] * scale[j] - dot;
                if i == j {
                    if s <= tol {
                        return Err(i);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, scale, lower: l })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let l = &self.lower;
        let mut z: Vec<f64> = (0..n).map(|i| b[i] * self.scale[i]).collect();
        for i in 0..n {
            let dot: f64 = l[i * n..i * n + i]
                .iter()
                .zip(&z[..i])
                .map(|(x, y)| x * y)
                .sum();
            z[i] = (z[i] - dot) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        DVector::from_iterator(n, z.iter().zip(&self.scale).map(|(v, s)| v * s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_fit_has_zero_residuals() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = ols(&y, &x).unwrap();
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_recovers_mean() {
        let x = DMatrix::from_element(5, 1, 1.0);
        let y = [2.0, 4.0, 9.0, -1.0, 6.0];
        let fit = ols(&y, &x).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_on_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fit = ols(&y, &x).unwrap();
        // oracle: solve X'X b = X'y directly
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_column_slice(&y);
        let b = xtx.lu().solve(&xty).unwrap();
        for k in 0..3 {
            assert!((fit.coefficients[k] - b[k]).abs() < 1e-9);
        }
        // residuals orthogonal to every column
        let r = DVector::from_column_slice(&fit.residuals);
        for k in 0..3 {
            assert!(x.column(k).dot(&r).abs() < 1e-10);
        }
    }

    #[test]
    fn collinear_design_rejected_but_min_norm_works() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(ols(&y, &x), Err(Error::RankDeficient(_))));
        let fit = ols_min_norm(&y, &x).unwrap();
        let mean_resid: f64 = fit.residuals.iter().sum::<f64>() / 4.0;
        assert!(mean_resid.abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            ols(&[1.0, 2.0], &x),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn scaled_cholesky_solves_and_flags_collinearity() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let c = ScaledCholesky::new(&a, 1e-12).unwrap();
        let x = c.solve(&DVector::from_vec(vec![2.0, 1.0]));
        let back = &a * &x;
        assert!((back[0] - 2.0).abs() < 1e-12 && (back[1] - 1.0).abs() < 1e-12);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(ScaledCholesky::new(&singular, 1e-10).unwrap_err(), 1);
    }
}
