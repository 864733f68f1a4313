//! Driscoll-Kraay covariance: sandwich with a Bartlett-weighted long-run
//! variance of cross-sectionally summed scores.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Bartlett weight `1 - j/(lags+1)`.
pub fn bartlett(j: usize, lags: usize) -> f64 {
    1.0 - j as f64 / (lags as f64 + 1.0)
}

/// `Σ_t h_t h_t' + Σ_{j=1..lags} w_j Σ_t (h_t h_{t-j}' + h_{t-j} h_t')`, with
/// periods matched by their integer time labels (a missing period contributes
/// nothing).
pub fn kernel_long_run(scores: &BTreeMap<i64, DVector<f64>>, lags: usize) -> DMatrix<f64> {
    let k = scores.values().next().map_or(0, |v| v.len());
    let mut s = DMatrix::<f64>::zeros(k, k);
    for (t, h) in scores {
        s.ger(1.0, h, h, 1.0);
        for j in 1..=lags {
            if let Some(prev) = scores.get(&(t - j as i64)) {
                let w = bartlett(j, lags);
                s.ger(w, h, prev, 1.0);
                s.ger(w, prev, h, 1.0);
            }
        }
    }
    s
}

/// Driscoll-Kraay covariance of OLS coefficients.
///
/// `time[r]` is the period of row `r`; `residuals` are the OLS residuals.
pub fn driscoll_kraay_cov(
    residuals: &[f64],
    regressors: &DMatrix<f64>,
    time: &[i64],
    lags: usize,
) -> Result<DMatrix<f64>> {
    let (n, k) = regressors.shape();
    if residuals.len() != n || time.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} residuals and {} time labels for {n} rows",
            residuals.len(),
            time.len()
        )));
    }
    let mut scores: BTreeMap<i64, DVector<f64>> = BTreeMap::new();
    for r in 0..n {
        let h = scores.entry(time[r]).or_insert_with(|| DVector::zeros(k));
        h.axpy(residuals[r], &regressors.row(r).transpose(), 1.0);
    }
    if scores.len() < lags + 1 {
        return Err(Error::InsufficientData(format!(
            "{} distinct periods for {lags} kernel lags",
            scores.len()
        )));
    }
    let bread = (regressors.transpose() * regressors)
        .try_inverse()
        .ok_or_else(|| Error::Singular("X'X is not invertible".into()))?;
    let meat = kernel_long_run(&scores, lags);
    let v = &bread * meat * &bread;
    Ok((&v + v.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_residuals_give_zero_covariance() {
        let x = DMatrix::from_fn(6, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
        let v = driscoll_kraay_cov(&[0.0; 6], &x, &[0, 1, 2, 3, 4, 5], 2).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn no_lags_single_unit_is_white_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(12, 2, |_, c| {
            if c == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let u: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<i64> = (0..12).collect();
        let v = driscoll_kraay_cov(&u, &x, &t, 0).unwrap();
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let mut meat = DMatrix::zeros(2, 2);
        for r in 0..12 {
            let xr = x.row(r).transpose();
            meat += &xr * xr.transpose() * (u[r] * u[r]);
        }
        let hc0 = &bread * meat * &bread;
        assert!((v - hc0).amax() < 1e-14);
    }

    #[test]
    fn too_few_periods() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let err = driscoll_kraay_cov(&[1.0, -1.0, 1.0, -1.0], &x, &[0, 0, 1, 1], 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn weights_decline_linearly() {
        assert_eq!(bartlett(0, 2), 1.0);
        assert!((bartlett(1, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((bartlett(2, 2) - 1.0 / 3.0).abs() < 1e-15);
    }
}
