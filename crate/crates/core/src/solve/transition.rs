use log::info;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_steady_with, Aggregates, SolverOptions};
use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::model::{
    period_residuals, reconstruct, reduce, reduced_len, select_reduced, Block, GovernmentPath,
    HatState, Timing,
};

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSolution {
    pub path: Vec<HatState>,
    pub g_path: Vec<Vec<f64>>,
    pub aggregates: Vec<Aggregates>,
    /// Long-run state the path converges to.
    pub terminal: HatState,
    pub horizon: usize,
    /// Max log distance of the last period from `terminal`.
    pub terminal_gap: f64,
}

/// Reduced residual of one period as a function of neighbouring periods.
struct PeriodFn<'a> {
    calib: &'a Calibration,
    k0: Vec<f64>,
}

impl PeriodFn<'_> {
    fn eval(&self, prev: Option<&[f64]>, cur: &[f64], next: &[f64], g: &[f64]) -> Vec<f64> {
        let c = self.calib;
        let state = reconstruct(cur, c);
        let next = reconstruct(next, c);
        let full = match prev {
            None => period_residuals(
                &state,
                c,
                g,
                Timing::Initial {
                    k0: &self.k0,
                    next: &next,
                },
            ),
            Some(prev) => {
                let prev = reconstruct(prev, c);
                period_residuals(
                    &state,
                    c,
                    g,
                    Timing::Interior {
                        prev: &prev,
                        next: &next,
                    },
                )
            }
        };
        select_reduced(&full, c.n)
    }

    /// Central-difference derivative with respect to one of the three slots.
    fn jacobian(&self, initial: bool, z: &[f64], g: &[f64], slot: usize) -> DMatrix<f64> {
        let m = z.len();
        let cols: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut zp = [z.to_vec(), z.to_vec(), z.to_vec()];
                let mut zm = zp.clone();
                zp[slot][j] += FD_STEP;
                zm[slot][j] -= FD_STEP;
                let ev =
                    |v: &[Vec<f64>; 3]| self.eval((!initial).then_some(&v[0][..]), &v[1], &v[2], g);
                let (fp, fm) = (ev(&zp), ev(&zm));
                fp.iter()
                    .zip(&fm)
                    .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                    .collect()
            })
            .collect();
        DMatrix::from_fn(m, m, |i, j| cols[j][i])
    }
}

struct Linearization {
    z_star: Vec<f64>,
    g_star: Vec<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    b0: DMatrix<f64>,
    c0: DMatrix<f64>,
    f0: Vec<f64>,
    f: Vec<f64>,
    /// rows of the goods-clearing block within the reduced residual
    goods_offset: usize,
}

fn linearize(calib: &Calibration, terminal: &HatState, g_star: Vec<f64>) -> Linearization {
    let n = calib.n;
    let pf = PeriodFn {
        calib,
        k0: vec![1.0; n],
    };
    let z = reduce(terminal);
    let f = pf.eval(Some(&z), &z, &z, &g_star);
    let f0 = pf.eval(None, &z, &z, &g_star);
    let goods_offset =
        Block::ValueAddedPrice.len(n) + Block::Euler.len(n) + Block::CapitalAccumulation.len(n);
    Linearization {
        a: pf.jacobian(false, &z, &g_star, 0),
        b: pf.jacobian(false, &z, &g_star, 1),
        c: pf.jacobian(false, &z, &g_star, 2),
        b0: pf.jacobian(true, &z, &g_star, 1),
        c0: pf.jacobian(true, &z, &g_star, 2),
        z_star: z,
        g_star,
        f0,
        f,
        goods_offset,
    }
}

/// Solves `A x_{t-1} + B_t x_t + C_t x_{t+1} = d_t` for `t = 0..=H` with
/// `x_{H+1} = 0` and no `A` term at `t = 0`. Eliminates backwards into the
/// recursion `x_t = P_t x_{t-1} + q_t`, which stays bounded on saddle-path
/// systems. `P_t` depends only on the distance to `H` and is stored until it
/// stops changing.
fn solve_stacked(lin: &Linearization, rhs: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>> {
    let h = rhs.len() - 1;
    let m = lin.b.nrows();
    let singular = |t: usize| Error::Singular(format!("stacked transition system at period {t}"));
    let mut policies: Vec<DMatrix<f64>> = Vec::new();
    let mut factors = Vec::new();
    let mut p_next = DMatrix::<f64>::zeros(m, m);
    for s in 0..h {
        let lu = (&lin.b + &lin.c * &p_next).lu();
        let p = -lu.solve(&lin.a).ok_or_else(|| singular(h - s))?;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(singular(h - s));
        }
        let settled = s > 0 && (&p - &p_next).amax() <= 1e-15 * (1.0 + p.amax());
        policies.push(p.clone());
        factors.push(lu);
        p_next = p;
        if settled {
            break;
        }
    }
    let at = |t: usize| (h - t).min(policies.len() - 1);

    let mut q: Vec<DVector<f64>> = vec![DVector::zeros(m); h + 2];
    for t in (1..=h).rev() {
        let d = &rhs[t] - &lin.c * &q[t + 1];
        q[t] = factors[at(t)].solve(&d).ok_or_else(|| singular(t))?;
    }
    let p1 = if h >= 1 {
        policies[at(1)].clone()
    } else {
        DMatrix::zeros(m, m)
    };
    let lu0 = (&lin.b0 + &lin.c0 * &p1).lu();
    let x0 = lu0
        .solve(&(&rhs[0] - &lin.c0 * &q[1]))
        .ok_or_else(|| singular(0))?;
    let mut x = Vec::with_capacity(h + 1);
    x.push(x0);
    for t in 1..=h {
        let next = &policies[at(t)] * &x[t - 1] + &q[t];
        x.push(next);
    }
    if x.iter().any(|v| v.iter().any(|e| !e.is_finite())) {
        return Err(singular(0));
    }
    Ok(x)
}

fn solve_horizon(
    calib: &Calibration,
    lin: &Linearization,
    g: &GovernmentPath,
    horizon: usize,
) -> Result<Vec<DVector<f64>>> {
    let n = calib.n;
    let rhs: Vec<DVector<f64>> = (0..=horizon)
        .map(|t| {
            let mut d: Vec<f64> = if t == 0 {
                lin.f0.clone()
            } else {
                lin.f.clone()
            };
            let gt = g.at(t);
            for i in 0..n {
                d[lin.goods_offset + i] += calib.gamma[i] * (gt[i] - lin.g_star[i]);
            }
            DVector::from_iterator(d.len(), d.into_iter().map(|v| -v))
        })
        .collect();
    solve_stacked(lin, rhs)
}

/// First-order perfect-foresight path, linearized at the long-run state of
/// the shock, with capital fixed at its initial level in period 0. The
/// horizon is doubled (up to `opts.max_horizon`) until the last period is
/// within `opts.terminal_tol` of the long-run state. Each horizon is solved
/// on a stacked system twice as long so the truncation does not distort the
/// reported periods.
pub fn solve_transition(
    calib: &Calibration,
    g_path: &GovernmentPath,
    horizon: usize,
    opts: &SolverOptions,
) -> Result<TransitionSolution> {
    g_path.check(calib.n)?;
    if horizon < 1 {
        return Err(Error::InvalidInput(
            "transition horizon must be at least 1".into(),
        ));
    }
    let g_star = g_path.terminal();
    let terminal = if g_path.is_permanent() {
        solve_steady_with(calib, &g_star, opts)?.state
    } else {
        HatState::ones(calib.n)
    };
    let lin = linearize(calib, &terminal, g_star);
    let m = reduced_len(calib.n);
    let mut horizon = horizon;
    loop {
        let mut dz = solve_horizon(calib, &lin, g_path, 2 * horizon)?;
        dz.truncate(horizon + 1);
        let gap = dz[horizon].amax();
        if gap <= opts.terminal_tol || horizon * 2 > opts.max_horizon.max(horizon) {
            if !(gap <= opts.terminal_tol) {
                return Err(Error::TerminalGap { gap, horizon });
            }
            let mut path = Vec::with_capacity(horizon + 1);
            let mut g_all = Vec::with_capacity(horizon + 1);
            let mut aggregates = Vec::with_capacity(horizon + 1);
            for (t, d) in dz.iter().enumerate() {
                let z: Vec<f64> = (0..m).map(|i| lin.z_star[i] + d[i]).collect();
                let state = reconstruct(&z, calib);
                let gt = g_path.at(t);
                aggregates.push(Aggregates::of(&state, &gt, calib)?);
                path.push(state);
                g_all.push(gt);
            }
            return Ok(TransitionSolution {
                path,
                g_path: g_all,
                aggregates,
                terminal,
                horizon,
                terminal_gap: gap,
            });
        }
        info!("terminal gap {gap:.3e} at T = {horizon}; doubling the horizon");
        horizon *= 2;
    }
}
