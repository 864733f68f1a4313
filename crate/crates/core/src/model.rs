//! Equilibrium conditions of the production network in hat form (values
//! relative to the initial steady state).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};

/// Hat values of every endogenous variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatState {
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub va: Vec<f64>,
    /// intermediate bundle
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub p_inv: Vec<f64>,
    /// investment bundle
    pub inv: Vec<f64>,
    /// household consumption of each good
    pub f: Vec<f64>,
    pub p_va: Vec<f64>,
    pub p_x: Vec<f64>,
    pub c: f64,
    pub l_agg: f64,
    pub w: f64,
}

impl HatState {
    pub fn ones(n: usize) -> Self {
        let v = vec![1.0; n];
        Self {
            p: v.clone(),
            y: v.clone(),
            va: v.clone(),
            x: v.clone(),
            k: v.clone(),
            l: v.clone(),
            r: v.clone(),
            p_inv: v.clone(),
            inv: v.clone(),
            f: v.clone(),
            p_va: v.clone(),
            p_x: v,
            c: 1.0,
            l_agg: 1.0,
            w: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    fn vectors(&self) -> [(&'static str, &Vec<f64>); 12] {
        [
            ("p", &self.p),
            ("y", &self.y),
            ("va", &self.va),
            ("x", &self.x),
            ("k", &self.k),
            ("l", &self.l),
            ("r", &self.r),
            ("p_inv", &self.p_inv),
            ("inv", &self.inv),
            ("f", &self.f),
            ("p_va", &self.p_va),
            ("p_x", &self.p_x),
        ]
    }

    /// All entries strictly positive and finite, with consistent sizes.
    pub fn check(&self, n: usize) -> Result<()> {
        for (name, v) in self.vectors() {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "state field {name} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "state field {name} has non-positive entry {x}"
                )));
            }
        }
        for (name, x) in [("c", self.c), ("l_agg", self.l_agg), ("w", self.w)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "state field {name} = {x} is not positive"
                )));
            }
        }
        Ok(())
    }

    /// Largest absolute log difference across all fields.
    pub fn max_log_gap(&self, other: &HatState) -> f64 {
        let mut m = 0.0f64;
        for ((_, a), (_, b)) in self.vectors().iter().zip(other.vectors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                m = m.max((x.ln() - y.ln()).abs());
            }
        }
        for (x, y) in [
            (self.c, other.c),
            (self.l_agg, other.l_agg),
            (self.w, other.w),
        ] {
            m = m.max((x.ln() - y.ln()).abs());
        }
        m
    }

    /// `Π p_i^{β_i}`
    pub fn price_index(&self, calib: &Calibration) -> f64 {
        self.p
            .iter()
            .zip(&calib.beta_cons)
            .map(|(p, b)| b * p.ln())
            .sum::<f64>()
            .exp()
    }
}

/// Equation blocks, in residual order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    ConsumptionDemand,
    Numeraire,
    LaborSupply,
    InvestmentPrice,
    Euler,
    CapitalAccumulation,
    Output,
    ValueAdded,
    ValueAddedDemand,
    ValueAddedPrice,
    CapitalDemand,
    LaborDemand,
    IntermediateDemand,
    IntermediatePrice,
    GoodsClearing,
    LaborClearing,
}

impl Block {
    pub const ALL: [Block; 16] = [
        Block::ConsumptionDemand,
        Block::Numeraire,
        Block::LaborSupply,
        Block::InvestmentPrice,
        Block::Euler,
        Block::CapitalAccumulation,
        Block::Output,
        Block::ValueAdded,
        Block::ValueAddedDemand,
        Block::ValueAddedPrice,
        Block::CapitalDemand,
        Block::LaborDemand,
        Block::IntermediateDemand,
        Block::IntermediatePrice,
        Block::GoodsClearing,
        Block::LaborClearing,
    ];

    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            Block::Numeraire | Block::LaborSupply | Block::LaborClearing
        )
    }

    pub fn len(self, n: usize) -> usize {
        if self.is_scalar() {
            1
        } else {
            n
        }
    }

    /// Position of this block in a residual vector for `n` industries.
    pub fn range(self, n: usize) -> Range<usize> {
        let mut start = 0;
        for b in Block::ALL {
            if b == self {
                return start..start + b.len(n);
            }
            start += b.len(n);
        }
        unreachable!()
    }

    pub fn total_len(n: usize) -> usize {
        13 * n + 3
    }
}

/// How the intertemporal equations are closed.
#[derive(Debug, Clone, Copy)]
pub enum Timing<'a> {
    Steady,
    /// First period: capital is the given initial stock.
    Initial {
        k0: &'a [f64],
        next: &'a HatState,
    },
    Interior {
        prev: &'a HatState,
        next: &'a HatState,
    },
}

fn dot_log(weights_col: nalgebra::DMatrixView<'_, f64>, p: &[f64]) -> f64 {
    weights_col.iter().zip(p).map(|(w, p)| w * p.ln()).sum()
}

/// Residuals of one period. Multiplicative conditions are written in logs,
/// the two clearing conditions as level differences of hats.
pub fn period_residuals(
    state: &HatState,
    calib: &Calibration,
    g_hat: &[f64],
    timing: Timing<'_>,
) -> Vec<f64> {
    let n = calib.n;
    let s = state;
    let mut out = vec![0.0; Block::total_len(n)];
    let ln = f64::ln;
    let (lc, lw) = (ln(s.c), ln(s.w));
    let beta = calib.beta_disc;
    let mut put = |b: Block, i: usize, v: f64| out[b.range(n).start + i] = v;

    for i in 0..n {
        let (p, y, va, x) = (ln(s.p[i]), ln(s.y[i]), ln(s.va[i]), ln(s.x[i]));
        let (k, l, r) = (ln(s.k[i]), ln(s.l[i]), ln(s.r[i]));
        let (pva, px, pinv) = (ln(s.p_va[i]), ln(s.p_x[i]), ln(s.p_inv[i]));
        let (a, th, dep) = (calib.alpha[i], calib.theta[i], calib.delta_dep[i]);
        put(Block::ConsumptionDemand, i, ln(s.f[i]) - (lc - p));
        put(
            Block::InvestmentPrice,
            i,
            pinv - dot_log(calib.chi.column(i).as_view(), &s.p),
        );
        let keep = beta * (1.0 - dep);
        let euler = match timing {
            Timing::Steady => pinv - ln((1.0 - keep) * s.r[i] + keep * s.p_inv[i]),
            Timing::Initial { next, .. } | Timing::Interior { next, .. } => {
                pinv - lc - (ln((1.0 - keep) * next.r[i] + keep * next.p_inv[i]) - ln(next.c))
            }
        };
        put(Block::Euler, i, euler);
        let accumulation = match timing {
            Timing::Steady => ln(s.inv[i]) - k,
            Timing::Initial { k0, .. } => k - ln(k0[i]),
            Timing::Interior { prev, .. } => k - ln((1.0 - dep) * prev.k[i] + dep * prev.inv[i]),
        };
        put(Block::CapitalAccumulation, i, accumulation);
        put(Block::Output, i, y - th * va - (1.0 - th) * x);
        put(Block::ValueAdded, i, va - (1.0 - a) * k - a * l);
        put(Block::ValueAddedDemand, i, va - (p + y - pva));
        put(Block::ValueAddedPrice, i, pva - (1.0 - a) * r - a * lw);
        put(Block::CapitalDemand, i, k - (pva + va - r));
        put(Block::LaborDemand, i, l - (pva + va - lw));
        put(Block::IntermediateDemand, i, x - (p + y - px));
        put(
            Block::IntermediatePrice,
            i,
            px - dot_log(calib.omega.column(i).as_view(), &s.p),
        );

        let mut sales = calib.phi[i] * s.f[i] + calib.gamma[i] * g_hat[i];
        for j in 0..n {
            sales += calib.delta[(i, j)] * s.p_x[j] * s.x[j] / s.p[i];
            sales += calib.iota[(i, j)] * s.p_inv[j] * s.inv[j] / s.p[i];
        }
        put(Block::GoodsClearing, i, sales - s.y[i]);
    }
    let numeraire: f64 =
        s.p.iter()
            .zip(&calib.beta_cons)
            .map(|(p, b)| b * p.ln())
            .sum();
    put(Block::Numeraire, 0, numeraire);
    put(
        Block::LaborSupply,
        0,
        ln(s.l_agg) - calib.frisch * (lw - lc),
    );
    let labor: f64 = s.l.iter().zip(&calib.lambda).map(|(l, w)| l * w).sum();
    put(Block::LaborClearing, 0, labor - s.l_agg);
    out
}

fn check_inputs(state: &HatState, calib: &Calibration, g_hat: &[f64]) -> Result<()> {
    state.check(calib.n)?;
    if g_hat.len() != calib.n {
        return Err(Error::InvalidInput(format!(
            "{} government hats for {} industries",
            g_hat.len(),
            calib.n
        )));
    }
    if let Some(g) = g_hat.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "government hat {g} is not positive"
        )));
    }
    Ok(())
}

/// Steady-state residuals; all zero exactly at an equilibrium.
pub fn steady_residuals(state: &HatState, calib: &Calibration, g_hat: &[f64]) -> Result<Vec<f64>> {
    check_inputs(state, calib, g_hat)?;
    Ok(period_residuals(state, calib, g_hat, Timing::Steady))
}

/// Stacked residuals of a path `t = 0..=T`. Capital in period 0 is `k0`;
/// the last period looks forward to `terminal`.
pub fn dynamic_residuals(
    path: &[HatState],
    k0: &[f64],
    terminal: &HatState,
    calib: &Calibration,
    g_path: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if path.len() < 2 {
        return Err(Error::InvalidInput(
            "a transition path needs at least two periods".into(),
        ));
    }
    if g_path.len() != path.len() || k0.len() != calib.n {
        return Err(Error::InvalidInput(
            "path, government path and initial capital disagree in size".into(),
        ));
    }
    terminal.check(calib.n)?;
    if let Some(k) = k0.iter().find(|k| !(**k > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "initial capital hat {k} is not positive"
        )));
    }
    let mut out = Vec::with_capacity(path.len() * Block::total_len(calib.n));
    for (t, state) in path.iter().enumerate() {
        check_inputs(state, calib, &g_path[t])?;
        let next = path.get(t + 1).unwrap_or(terminal);
        let timing = if t == 0 {
            Timing::Initial { k0, next }
        } else {
            Timing::Interior {
                prev: &path[t - 1],
                next,
            }
        };
        out.extend(period_residuals(state, calib, &g_path[t], timing));
    }
    Ok(out)
}

/// Log-space unknowns of the reduced system:
/// `[ln p, ln y, ln k, ln inv, ln c, ln w]`.
pub fn reduced_len(n: usize) -> usize {
    4 * n + 2
}

/// Recovers the full state from the reduced unknowns using the conditions
/// that can be solved in closed form.
pub fn reconstruct(z: &[f64], calib: &Calibration) -> HatState {
    let n = calib.n;
    let exp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
    let p = exp(&z[0..n]);
    let y = exp(&z[n..2 * n]);
    let k = exp(&z[2 * n..3 * n]);
    let inv = exp(&z[3 * n..4 * n]);
    let (c, w) = (z[4 * n].exp(), z[4 * n + 1].exp());
    let lp = &z[0..n];
    let col_mean = |m: &nalgebra::DMatrix<f64>, i: usize| {
        m.column(i)
            .iter()
            .zip(lp)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .exp()
    };
    let p_x: Vec<f64> = (0..n).map(|i| col_mean(&calib.omega, i)).collect();
    let p_inv: Vec<f64> = (0..n).map(|i| col_mean(&calib.chi, i)).collect();
    let x: Vec<f64> = (0..n).map(|i| p[i] * y[i] / p_x[i]).collect();
    let va: Vec<f64> = (0..n)
        .map(|i| {
            let th = calib.theta[i];
            ((y[i].ln() - (1.0 - th) * x[i].ln()) / th).exp()
        })
        .collect();
    let p_va: Vec<f64> = (0..n).map(|i| p[i] * y[i] / va[i]).collect();
    let r: Vec<f64> = (0..n).map(|i| p[i] * y[i] / k[i]).collect();
    let l: Vec<f64> = (0..n).map(|i| p[i] * y[i] / w).collect();
    let f: Vec<f64> = p.iter().map(|p| c / p).collect();
    HatState {
        p,
        y,
        va,
        x,
        k,
        l,
        r,
        p_inv,
        inv,
        f,
        p_va,
        p_x,
        c,
        l_agg: (w / c).powf(calib.frisch),
        w,
    }
}

pub fn reduce(state: &HatState) -> Vec<f64> {
    let mut z: Vec<f64> = Vec::with_capacity(reduced_len(state.n()));
    for v in [&state.p, &state.y, &state.k, &state.inv] {
        z.extend(v.iter().map(|x| x.ln()));
    }
    z.push(state.c.ln());
    z.push(state.w.ln());
    z
}

/// Blocks left to solve once [`reconstruct`] has imposed the rest.
pub const REDUCED_BLOCKS: [Block; 6] = [
    Block::ValueAddedPrice,
    Block::Euler,
    Block::CapitalAccumulation,
    Block::GoodsClearing,
    Block::LaborClearing,
    Block::Numeraire,
];

pub fn select_reduced(full: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(reduced_len(n));
    for b in REDUCED_BLOCKS {
        out.extend_from_slice(&full[b.range(n)]);
    }
    out
}

/// Weighted mean government hat over the energy industries, by base
/// government purchases.
pub fn fuel_government_hat(calib: &Calibration, g_hat: &[f64]) -> f64 {
    let set = &calib.energy_set;
    if set.is_empty() {
        return 1.0;
    }
    let w: f64 = set.iter().map(|&i| calib.government_final[i]).sum();
    if w > 0.0 {
        set.iter()
            .map(|&i| calib.government_final[i] * g_hat[i])
            .sum::<f64>()
            / w
    } else {
        set.iter().map(|&i| g_hat[i]).sum::<f64>() / set.len() as f64
    }
}

/// Total emissions hat with fixed emission intensities.
pub fn emissions_hat(state: &HatState, g_fuel_hat: f64, calib: &Calibration) -> Result<f64> {
    let total = calib.eps_ind.iter().sum::<f64>() + calib.eps_hh + calib.eps_govt;
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!("emission shares sum to {total}")));
    }
    let ind: f64 = state.y.iter().zip(&calib.eps_ind).map(|(y, e)| y * e).sum();
    // normalising by the share total makes the no-change case exact
    Ok((ind + state.c * calib.eps_hh + g_fuel_hat * calib.eps_govt) / total)
}

/// Laspeyres quantity index of final uses (consumption, government,
/// investment) at base prices.
pub fn real_gdp_hat(state: &HatState, g_hat: &[f64], calib: &Calibration) -> Result<f64> {
    let n = calib.n;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let g = calib.gross_output[i];
        let mut q = calib.phi[i] * state.f[i] + calib.gamma[i] * g_hat[i];
        let mut base = calib.phi[i] + calib.gamma[i];
        for j in 0..n {
            let io = calib.iota[(i, j)];
            q += io * state.p_inv[j] * state.inv[j] / state.p[i];
            base += io;
        }
        num += g * q;
        den += g * base;
    }
    if !(den > 0.0) {
        return Err(Error::InvalidInput("economy has no final uses".into()));
    }
    Ok(num / den)
}

/// Household budget gap relative to base value added: consumption plus
/// investment plus government purchases (the lump-sum tax) minus factor
/// income. Zero at any equilibrium of a value-consistent calibration.
pub fn budget_gap(state: &HatState, g_hat: &[f64], calib: &Calibration) -> f64 {
    let n = calib.n;
    let (mut spend, mut income, mut base) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let g = calib.gross_output[i];
        spend += calib.phi[i] * g * state.c;
        spend += calib.gamma[i] * g * state.p[i] * g_hat[i];
        let inv_base: f64 = (0..n)
            .map(|k| calib.iota[(k, i)] * calib.gross_output[k])
            .sum();
        spend += inv_base * state.p_inv[i] * state.inv[i];
        income += calib.theta[i] * g * state.p[i] * state.y[i];
        base += calib.theta[i] * g;
    }
    (spend - income) / base
}

/// Government purchase hats over time: industries hit at `start` by
/// `impact - 1`, decaying geometrically at rate `rho` afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernmentPath {
    pub impact: Vec<f64>,
    pub rho: f64,
    pub start: usize,
}

impl GovernmentPath {
    pub fn constant(impact: Vec<f64>) -> Self {
        Self {
            impact,
            rho: 1.0,
            start: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.impact.len()
    }

    pub fn is_permanent(&self) -> bool {
        self.rho >= 1.0
    }

    pub fn at(&self, t: usize) -> Vec<f64> {
        if t < self.start {
            return vec![1.0; self.n()];
        }
        let decay = self.rho.powi((t - self.start) as i32);
        self.impact
            .iter()
            .map(|g| 1.0 + decay * (g - 1.0))
            .collect()
    }

    /// Long-run value of the path.
    pub fn terminal(&self) -> Vec<f64> {
        if self.is_permanent() {
            self.impact.clone()
        } else {
            vec![1.0; self.n()]
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::InvalidInput(format!(
                "government path has {} industries, expected {n}",
                self.n()
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidInput(format!(
                "persistence {} outside [0, 1]",
                self.rho
            )));
        }
        if let Some(g) = self.impact.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "government hat {g} is not positive"
            )));
        }
        Ok(())
    }
}
