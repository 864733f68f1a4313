use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Aggregates, SolverOptions};
use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::model::{period_residuals, reconstruct, reduced_len, select_reduced, HatState, Timing};

const FD_STEP: f64 = 1e-6;
/// Below this the residual is at rounding level and a failed line search ends
/// the iteration successfully.
const ROUNDING_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySolution {
    pub state: HatState,
    pub g_hat: Vec<f64>,
    pub aggregates: Aggregates,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn residual(z: &[f64], calib: &Calibration, g_hat: &[f64]) -> Vec<f64> {
    let state = reconstruct(z, calib);
    select_reduced(
        &period_residuals(&state, calib, g_hat, Timing::Steady),
        calib.n,
    )
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

fn jacobian(z: &[f64], calib: &Calibration, g_hat: &[f64]) -> DMatrix<f64> {
    let m = z.len();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[j] += FD_STEP;
            zm[j] -= FD_STEP;
            let (fp, fm) = (residual(&zp, calib, g_hat), residual(&zm, calib, g_hat));
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                .collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| cols[j][i])
}

pub fn solve_steady(calib: &Calibration, g_hat: &[f64]) -> Result<SteadySolution> {
    solve_steady_with(calib, g_hat, &SolverOptions::default())
}

/// Damped Newton iteration in logs from the initial steady state.
pub fn solve_steady_with(
    calib: &Calibration,
    g_hat: &[f64],
    opts: &SolverOptions,
) -> Result<SteadySolution> {
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
    let mut z = vec![0.0; reduced_len(calib.n)];
    let mut f = residual(&z, calib, g_hat);
    let mut norm = max_norm(&f);
    let mut iterations = 0;
    while norm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let jac = jacobian(&z, calib, g_hat);
        let step = jac
            .lu()
            .solve(&DVector::from_vec(f.iter().map(|v| -v).collect()))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("steady-state Jacobian".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let ft = residual(&trial, calib, g_hat);
            let nt = max_norm(&ft);
            if nt < norm {
                z = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if norm < ROUNDING_FLOOR {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
    }
    let state = reconstruct(&z, calib);
    let aggregates = Aggregates::of(&state, g_hat, calib)?;
    let residual_norm = max_norm(&period_residuals(&state, calib, g_hat, Timing::Steady));
    Ok(SteadySolution {
        state,
        g_hat: g_hat.to_vec(),
        aggregates,
        residual_norm,
        iterations,
    })
}
