//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use milspend_core::calibration::{
    Depreciation, EmissionLevels, InvestmentNetwork, RawInputs, UseTable,
};
use milspend_core::synthetic::EconomySpec;
use milspend_core::{CalibrationConfig, HatState};
use nalgebra::{DMatrix, DVector};

/// Steady-state levels of every variable, prices included.
#[derive(Debug, Clone)]
pub struct LevelEq {
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub va: Vec<f64>,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub p_inv: Vec<f64>,
    pub inv: Vec<f64>,
    pub f: Vec<f64>,
    pub p_va: Vec<f64>,
    pub p_x: Vec<f64>,
    pub g: Vec<f64>,
    pub c: f64,
    pub l_agg: f64,
    pub w: f64,
}

/// Level economy with Cobb-Douglas technologies and preferences, solved by
/// fixed-point iteration on unit costs and bisection on consumption.
pub struct LevelModel {
    pub spec: EconomySpec,
    pub beta_cons: Vec<f64>,
    /// labor disutility scale
    pub kappa: f64,
}

impl LevelModel {
    pub fn new(spec: EconomySpec) -> Self {
        let s: f64 = spec.household.iter().sum();
        let beta_cons = spec.household.iter().map(|h| h / s).collect();
        Self {
            spec,
            beta_cons,
            kappa: 1.0,
        }
    }

    fn n(&self) -> usize {
        self.spec.labels.len()
    }

    /// Log unit costs with `w = 1`, then rescaled so `Π p^β = 1`.
    pub fn prices(&self) -> (Vec<f64>, f64) {
        let s = &self.spec;
        let n = self.n();
        let b = s.beta_disc;
        let mut lp = vec![0.0; n];
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            let mut change = 0.0f64;
            for i in 0..n {
                let lpx: f64 = (0..n)
                    .filter(|&j| s.omega[(j, i)] > 0.0)
                    .map(|j| s.omega[(j, i)] * (lp[j] - s.omega[(j, i)].ln()))
                    .sum();
                let lpi: f64 = (0..n)
                    .filter(|&j| s.chi[(j, i)] > 0.0)
                    .map(|j| s.chi[(j, i)] * (lp[j] - s.chi[(j, i)].ln()))
                    .sum();
                let d = s.depreciation[i];
                let lr = lpi + ((1.0 - b * (1.0 - d)) / b).ln();
                let a = s.alpha[i];
                let lpva = (1.0 - a) * (lr - (1.0 - a).ln()) + a * (0.0 - a.ln());
                let th = s.theta[i];
                let mut v = th * (lpva - th.ln());
                if th < 1.0 {
                    v += (1.0 - th) * (lpx - (1.0 - th).ln());
                }
                next[i] = v;
                change = change.max((v - lp[i]).abs());
            }
            lp = next;
            if change < 1e-15 {
                break;
            }
        }
        let lpi: f64 = lp.iter().zip(&self.beta_cons).map(|(p, b)| p * b).sum();
        // homogeneous of degree one in w
        let w = (-lpi).exp();
        (lp.iter().map(|v| (v - lpi).exp()).collect(), w)
    }

    pub fn solve(&self, gov_quantity: &[f64]) -> LevelEq {
        let s = &self.spec;
        let n = self.n();
        let (p, w) = self.prices();
        let b = s.beta_disc;
        let inv_share: Vec<f64> = (0..n)
            .map(|j| {
                let d = s.depreciation[j];
                d * b * (1.0 - s.alpha[j]) * s.theta[j] / (1.0 - b * (1.0 - d))
            })
            .collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - s.omega[(i, j)] * (1.0 - s.theta[j]) - s.chi[(i, j)] * inv_share[j]
        });
        let lu = m.lu();
        let values = |c: f64| -> Vec<f64> {
            let rhs = DVector::from_iterator(
                n,
                (0..n).map(|i| self.beta_cons[i] * c + p[i] * gov_quantity[i]),
            );
            lu.solve(&rhs).unwrap().iter().copied().collect()
        };
        let excess = |c: f64| -> f64 {
            let v = values(c);
            let demand: f64 = (0..n).map(|i| s.alpha[i] * s.theta[i] * v[i] / w).sum();
            demand - self.kappa * (w / c).powf(s_frisch())
        };
        let (mut lo, mut hi) = (1e-12, 1.0);
        while excess(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = 0.5 * (lo + hi);
        let v = values(c);
        let mut eq = LevelEq {
            p: p.clone(),
            y: vec![0.0; n],
            va: vec![0.0; n],
            x: vec![0.0; n],
            k: vec![0.0; n],
            l: vec![0.0; n],
            r: vec![0.0; n],
            p_inv: vec![0.0; n],
            inv: vec![0.0; n],
            f: vec![0.0; n],
            p_va: vec![0.0; n],
            p_x: vec![0.0; n],
            g: gov_quantity.to_vec(),
            c,
            l_agg: self.kappa * (w / c).powf(s_frisch()),
            w,
        };
        for i in 0..n {
            let (a, th, d) = (s.alpha[i], s.theta[i], s.depreciation[i]);
            eq.p_x[i] = (0..n)
                .filter(|&j| s.omega[(j, i)] > 0.0)
                .map(|j| s.omega[(j, i)] * (p[j] / s.omega[(j, i)]).ln())
                .sum::<f64>()
                .exp();
            eq.p_inv[i] = (0..n)
                .filter(|&j| s.chi[(j, i)] > 0.0)
                .map(|j| s.chi[(j, i)] * (p[j] / s.chi[(j, i)]).ln())
                .sum::<f64>()
                .exp();
            eq.r[i] = eq.p_inv[i] * (1.0 - b * (1.0 - d)) / b;
            eq.p_va[i] = (eq.r[i] / (1.0 - a)).powf(1.0 - a) * (w / a).powf(a);
            eq.y[i] = v[i] / p[i];
            eq.va[i] = th * v[i] / eq.p_va[i];
            eq.x[i] = (1.0 - th) * v[i] / eq.p_x[i];
            eq.k[i] = (1.0 - a) * th * v[i] / eq.r[i];
            eq.l[i] = a * th * v[i] / w;
            eq.inv[i] = d * eq.k[i];
            eq.f[i] = self.beta_cons[i] * c / p[i];
        }
        eq
    }

    /// Use table and other inputs generated from a level equilibrium.
    pub fn inputs(&self, eq: &LevelEq) -> RawInputs {
        let s = &self.spec;
        let n = self.n();
        let v: Vec<f64> = (0..n).map(|i| eq.p[i] * eq.y[i]).collect();
        let intermediate = DMatrix::from_fn(n, n, |i, j| s.omega[(i, j)] * eq.p_x[j] * eq.x[j]);
        let flows = DMatrix::from_fn(n, n, |i, j| s.chi[(i, j)] * eq.p_inv[j] * eq.inv[j]);
        let table = UseTable {
            codes: (0..n).map(|i| format!("c{i}")).collect(),
            labels: s.labels.clone(),
            intermediate,
            labor_comp: (0..n).map(|i| eq.w * eq.l[i]).collect(),
            capital_comp: (0..n).map(|i| eq.r[i] * eq.k[i]).collect(),
            household_final: (0..n).map(|i| eq.p[i] * eq.f[i]).collect(),
            government_final: (0..n).map(|i| eq.p[i] * eq.g[i]).collect(),
            investment_final: (0..n).map(|i| flows.row(i).sum()).collect(),
            gross_output: v,
        };
        RawInputs {
            table,
            investment: InvestmentNetwork::single(2017, flows),
            depreciation: Depreciation {
                rates: BTreeMap::from([(2017, s.depreciation.clone())]),
            },
            emissions: EmissionLevels {
                industry: s.emission_intensity.clone(),
                household: s.household_emissions,
                government: s.government_emissions,
            },
            config: CalibrationConfig {
                maintenance_share: 0.0,
                ..Default::default()
            },
        }
    }

    /// Levels implied by base levels and a hat state.
    pub fn unhat(&self, base: &LevelEq, h: &HatState, g_hat: &[f64]) -> LevelEq {
        let m = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
        LevelEq {
            p: m(&base.p, &h.p),
            y: m(&base.y, &h.y),
            va: m(&base.va, &h.va),
            x: m(&base.x, &h.x),
            k: m(&base.k, &h.k),
            l: m(&base.l, &h.l),
            r: m(&base.r, &h.r),
            p_inv: m(&base.p_inv, &h.p_inv),
            inv: m(&base.inv, &h.inv),
            f: m(&base.f, &h.f),
            p_va: m(&base.p_va, &h.p_va),
            p_x: m(&base.p_x, &h.p_x),
            g: m(&base.g, g_hat),
            c: base.c * h.c,
            l_agg: base.l_agg * h.l_agg,
            w: base.w * h.w,
        }
    }

    /// Steady-state equilibrium conditions written in levels, in the same
    /// order and scale as the hat residuals. Productivity constants are
    /// pinned by the base equilibrium.
    pub fn residuals(&self, base: &LevelEq, e: &LevelEq) -> Vec<f64> {
        let s = &self.spec;
        let n = self.n();
        let b = s.beta_disc;
        let ln = f64::ln;
        let mut blocks: Vec<Vec<f64>> = vec![Vec::new(); 16];
        let cd_price = |w: &DMatrix<f64>, i: usize, p: &[f64]| -> f64 {
            (0..n)
                .filter(|&j| w[(j, i)] > 0.0)
                .map(|j| w[(j, i)] * ln(p[j] / w[(j, i)]))
                .sum()
        };
        for i in 0..n {
            let (a, th, d) = (s.alpha[i], s.theta[i], s.depreciation[i]);
            let tfp_y = ln(base.y[i]) - th * ln(base.va[i]) - (1.0 - th) * ln(base.x[i]);
            let tfp_va = ln(base.va[i]) - (1.0 - a) * ln(base.k[i]) - a * ln(base.l[i]);
            let unit_va =
                (1.0 - a) * ln(base.r[i] / (1.0 - a)) + a * ln(base.w / a) - ln(base.p_va[i]);
            blocks[0].push(ln(e.f[i]) - ln(self.beta_cons[i] * e.c / e.p[i]));
            blocks[3].push(ln(e.p_inv[i]) - cd_price(&s.chi, i, &e.p));
            blocks[4].push(ln(e.p_inv[i]) - ln(b * e.r[i] + b * (1.0 - d) * e.p_inv[i]));
            blocks[5].push(ln(e.inv[i]) - ln(d * e.k[i]));
            blocks[6].push(ln(e.y[i]) - tfp_y - th * ln(e.va[i]) - (1.0 - th) * ln(e.x[i]));
            blocks[7].push(ln(e.va[i]) - tfp_va - (1.0 - a) * ln(e.k[i]) - a * ln(e.l[i]));
            blocks[8].push(ln(e.p_va[i] * e.va[i]) - ln(th * e.p[i] * e.y[i]));
            blocks[9].push(
                ln(e.p_va[i]) - ((1.0 - a) * ln(e.r[i] / (1.0 - a)) + a * ln(e.w / a) - unit_va),
            );
            blocks[10].push(ln(e.r[i] * e.k[i]) - ln((1.0 - a) * e.p_va[i] * e.va[i]));
            blocks[11].push(ln(e.w * e.l[i]) - ln(a * e.p_va[i] * e.va[i]));
            blocks[12].push(ln(e.p_x[i] * e.x[i]) - ln((1.0 - th) * e.p[i] * e.y[i]));
            blocks[13].push(ln(e.p_x[i]) - cd_price(&s.omega, i, &e.p));
            let mut supply_use = e.f[i] + e.g[i];
            for j in 0..n {
                supply_use += s.omega[(i, j)] * e.p_x[j] * e.x[j] / e.p[i];
                supply_use += s.chi[(i, j)] * e.p_inv[j] * e.inv[j] / e.p[i];
            }
            blocks[14].push((supply_use - e.y[i]) / base.y[i]);
        }
        let lp: f64 =
            e.p.iter()
                .zip(&self.beta_cons)
                .map(|(p, b)| b * ln(*p))
                .sum();
        blocks[1].push(lp);
        blocks[2].push(ln(e.l_agg) - ln(self.kappa) - s_frisch() * (ln(e.w) - ln(e.c)));
        blocks[15].push((e.l.iter().sum::<f64>() - e.l_agg) / base.l_agg);
        blocks.concat()
    }
}

pub fn s_frisch() -> f64 {
    0.4
}

/// Hats of the level equilibrium `eq` relative to `base`.
pub fn level_ratios(base: &LevelEq, eq: &LevelEq) -> HatState {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x / y).collect::<Vec<_>>();
    HatState {
        p: d(&eq.p, &base.p),
        y: d(&eq.y, &base.y),
        va: d(&eq.va, &base.va),
        x: d(&eq.x, &base.x),
        k: d(&eq.k, &base.k),
        l: d(&eq.l, &base.l),
        r: d(&eq.r, &base.r),
        p_inv: d(&eq.p_inv, &base.p_inv),
        inv: d(&eq.inv, &base.inv),
        f: d(&eq.f, &base.f),
        p_va: d(&eq.p_va, &base.p_va),
        p_x: d(&eq.p_x, &base.p_x),
        c: eq.c / base.c,
        l_agg: eq.l_agg / base.l_agg,
        w: eq.w / base.w,
    }
}

/// Base government quantities of the spec at base prices.
pub fn base_government(model: &LevelModel) -> Vec<f64> {
    let (p, _) = model.prices();
    model
        .spec
        .government
        .iter()
        .zip(&p)
        .map(|(g, p)| g / p)
        .collect()
}

/// OLS residuals via the normal equations, solved by Gaussian elimination
/// with partial pivoting.
pub fn normal_equation_residuals(y: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yv) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yv;
        }
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    x.iter()
        .zip(y)
        .map(|(row, yv)| yv - row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Driscoll-Kraay covariance written as a double sum over periods and
/// units: `(X'X)^{-1} [Σ_{|s-t| <= m} w(|s-t|) Σ_i Σ_j x_it u_it u_js x_js'] (X'X)^{-1}`.
pub fn dk_double_sum(x: &DMatrix<f64>, u: &[f64], time: &[i64], lags: usize) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for a in 0..n {
        for c in 0..n {
            let gap = (time[a] - time[c]).unsigned_abs() as usize;
            if gap > lags {
                continue;
            }
            let w = 1.0 - gap as f64 / (lags as f64 + 1.0);
            for p in 0..k {
                for q in 0..k {
                    meat[(p, q)] += w * x[(a, p)] * u[a] * u[c] * x[(c, q)];
                }
            }
        }
    }
    let bread = (x.transpose() * x).try_inverse().unwrap();
    &bread * meat * &bread
}

/// True response of the simulated LP panels: zero on impact, rising
/// linearly to 2 at horizon 6 and back to 0 at horizon 12.
pub fn hump_truth(h: usize) -> f64 {
    let h = h as f64;
    if h <= 6.0 {
        2.0 * h / 6.0
    } else {
        (2.0 * (12.0 - h) / 6.0).max(0.0)
    }
}

/// Panel with `100 ln(real GDP) = a_i + b_t + scale_i Σ_k c_k s_{t-k} + e`,
/// iid standard normal shocks and noise. Emissions are real GDP times a
/// country intensity so the panel can be split by intensity.
pub fn hump_panel(
    countries: usize,
    years: usize,
    seed: u64,
    scale: &dyn Fn(usize) -> f64,
) -> (milspend_core::PanelDataset, milspend_core::ShockSet) {
    use milspend_core::{PanelObservation, ShockSeries, ShockSet};
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let burn = 13;
    let year_effect: Vec<f64> = (0..years)
        .map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut obs = Vec::new();
    let mut set = ShockSet::default();
    for c in 0..countries {
        let name = format!("K{c:03}");
        let a = rng.random_range(400.0..900.0);
        let intensity = 0.1 + c as f64;
        let s: Vec<f64> = (0..years + burn)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut shocks = BTreeMap::new();
        for t in 0..years {
            let resp: f64 = (0..=12).map(|k| hump_truth(k) * s[t + burn - k]).sum();
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = a + year_effect[t] + scale(c) * resp + e;
            let year = 1800 + t as i32;
            let rgdp = (y / 100.0).exp();
            obs.push(PanelObservation {
                country: name.clone(),
                year,
                real_gdp: Some(rgdp),
                emissions: Some(rgdp * intensity),
                ..Default::default()
            });
            shocks.insert(year, s[t + burn]);
        }
        set.insert(ShockSeries {
            country: name,
            shocks,
            horizon_h: 0,
            lag_l: 0,
        });
    }
    (
        milspend_core::PanelDataset::from_observations(obs).unwrap(),
        set,
    )
}
