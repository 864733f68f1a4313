//! Least squares with absorbed-by-dummy fixed effects, stored sparsely.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ScaledCholesky;
use crate::lp::dk::kernel_long_run;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct FeRow {
    pub y: f64,
    pub dense: Vec<f64>,
    pub dummies: Vec<usize>,
    pub time: i64,
}

#[derive(Debug, Clone)]
pub(crate) struct FeDesign {
    pub dense_names: Vec<String>,
    pub n_dummies: usize,
    pub rows: Vec<FeRow>,
}

#[derive(Debug, Clone)]
pub(crate) struct FeFit {
    pub dense_coef: Vec<f64>,
    pub dense_cov: DMatrix<f64>,
}

impl FeDesign {
    pub fn new(dense_names: Vec<String>, n_dummies: usize) -> Self {
        Self {
            dense_names,
            n_dummies,
            rows: Vec::new(),
        }
    }

    /// OLS with Driscoll-Kraay covariance for the dense block. Dummy columns
    /// are placed first so collinearity is attributed to a dense regressor.
    pub fn fit(&self, dk_lags: usize) -> Result<FeFit> {
        let kd = self.dense_names.len();
        let mut remap = vec![usize::MAX; self.n_dummies];
        let mut used = 0;
        for row in &self.rows {
            for &d in &row.dummies {
                if remap[d] == usize::MAX {
                    remap[d] = 0;
                }
            }
        }
        for slot in remap.iter_mut() {
            if *slot == 0 {
                *slot = used;
                used += 1;
            }
        }
        let p = used + kd;
        let n = self.rows.len();
        if n <= p {
            return Err(Error::InsufficientData(format!(
                "{n} observations for {p} coefficients"
            )));
        }

        let cols: Vec<Vec<usize>> = self
            .rows
            .iter()
            .map(|r| r.dummies.iter().map(|&d| remap[d]).collect())
            .collect();
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        for (row, dummies) in self.rows.iter().zip(&cols) {
            for (a, &da) in dummies.iter().enumerate() {
                xty[da] += row.y;
                for &db in &dummies[..=a] {
                    xtx[(da, db)] += 1.0;
                }
                for (k, &v) in row.dense.iter().enumerate() {
                    xtx[(used + k, da)] += v;
                }
            }
            for (k, &v) in row.dense.iter().enumerate() {
                xty[used + k] += v * row.y;
                for (m, &w) in row.dense[..=k].iter().enumerate() {
                    xtx[(used + k, used + m)] += v * w;
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                let v = xtx[(i, j)] + if i != j { xtx[(j, i)] } else { 0.0 };
                xtx[(i, j)] = v;
                xtx[(j, i)] = v;
            }
        }
        let chol = ScaledCholesky::new(&xtx, PIVOT_TOL).map_err(|col| {
            if col >= used {
                Error::RankDeficient(format!(
                    "regressor '{}' is collinear with the other columns",
                    self.dense_names[col - used]
                ))
            } else {
                Error::RankDeficient("fixed-effect columns are collinear".into())
            }
        })?;
        let beta = chol.solve(&xty);

        // Rows of (X'X)^{-1} belonging to the dense block, as p x kd.
        let mut bread = DMatrix::<f64>::zeros(p, kd);
        for k in 0..kd {
            let mut e = DVector::zeros(p);
            e[used + k] = 1.0;
            bread.set_column(k, &chol.solve(&e));
        }

        let mut scores: BTreeMap<i64, DVector<f64>> = BTreeMap::new();
        let mut q = DVector::<f64>::zeros(kd);
        for (row, dummies) in self.rows.iter().zip(&cols) {
            let mut fitted = 0.0;
            q.fill(0.0);
            for &d in dummies {
                fitted += beta[d];
                q += bread.row(d).transpose();
            }
            for (k, &v) in row.dense.iter().enumerate() {
                fitted += beta[used + k] * v;
                q.axpy(v, &bread.row(used + k).transpose(), 1.0);
            }
            let u = row.y - fitted;
            scores
                .entry(row.time)
                .or_insert_with(|| DVector::zeros(kd))
                .axpy(u, &q, 1.0);
        }
        if scores.len() < dk_lags + 1 {
            return Err(Error::InsufficientData(format!(
                "{} distinct periods for {dk_lags} kernel lags",
                scores.len()
            )));
        }
        let cov = kernel_long_run(&scores, dk_lags);
        Ok(FeFit {
            dense_coef: (0..kd).map(|k| beta[used + k]).collect(),
            dense_cov: (&cov + cov.transpose()) * 0.5,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::dk::driscoll_kraay_cov;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(seed: u64) -> (FeDesign, DMatrix<f64>, Vec<f64>, Vec<i64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (units, periods) = (5usize, 9usize);
        let mut d = FeDesign::new(vec!["s".into(), "x".into()], units + periods);
        let mut dense_x = Vec::new();
        for i in 0..units {
            for t in 0..periods {
                if rng.random_range(0.0..1.0) < 0.1 {
                    continue;
                }
                let s: f64 = rng.random_range(-1.0..1.0);
                let x: f64 = rng.random_range(-1.0..1.0);
                let y = 0.5 * s - 0.2 * x
                    + i as f64 * 0.3
                    + (t as f64).sin()
                    + rng.random_range(-0.5..0.5);
                let mut dummies = vec![i];
                if t > 0 {
                    dummies.push(units + t);
                }
                d.rows.push(FeRow {
                    y,
                    dense: vec![s, x],
                    dummies: dummies.clone(),
                    time: t as i64,
                });
                let mut full = vec![0.0; units + periods + 2];
                for du in dummies {
                    full[du] = 1.0;
                }
                full[units + periods] = s;
                full[units + periods + 1] = x;
                dense_x.push(full);
            }
        }
        let y: Vec<f64> = d.rows.iter().map(|r| r.y).collect();
        let t: Vec<i64> = d.rows.iter().map(|r| r.time).collect();
        let keep: Vec<usize> = (0..units + periods + 2).filter(|&c| c != units).collect();
        let x = DMatrix::from_fn(dense_x.len(), keep.len(), |r, c| dense_x[r][keep[c]]);
        (d, x, y, t)
    }

    #[test]
    fn matches_dense_regression() {
        for seed in 0..5 {
            let (d, x, y, t) = random_design(seed);
            let fit = d.fit(2).unwrap();
            let yv = DVector::from_vec(y);
            let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &yv;
            let k = x.ncols();
            assert!((fit.dense_coef[0] - beta[k - 2]).abs() < 1e-10);
            assert!((fit.dense_coef[1] - beta[k - 1]).abs() < 1e-10);
            let u: Vec<f64> = (&yv - &x * &beta).iter().copied().collect();
            let v = driscoll_kraay_cov(&u, &x, &t, 2).unwrap();
            let sub = v.view((k - 2, k - 2), (2, 2));
            assert!((fit.dense_cov.clone() - sub).amax() < 1e-10 * sub.amax().max(1.0));
        }
    }

    #[test]
    fn constant_regressor_is_collinear_with_unit_dummies() {
        let mut d = FeDesign::new(vec!["s".into()], 2);
        for t in 0..10 {
            d.rows.push(FeRow {
                y: t as f64,
                dense: vec![1.0],
                dummies: vec![t % 2],
                time: t as i64,
            });
        }
        match d.fit(1) {
            Err(Error::RankDeficient(msg)) => assert!(msg.contains("'s'")),
            other => panic!("{other:?}"),
        }
    }
}
