//! Steady-state and transition-path solvers.

mod report;
mod steady;
mod transition;

pub use report::{decompose_shocks, industry_report, Decomposition, IndustryChange};
pub use steady::{solve_steady, solve_steady_with, SteadySolution};
pub use transition::{solve_transition, TransitionSolution};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Max-norm residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest horizon tried by the transition solver.
    pub max_horizon: usize,
    /// Accepted distance of the last period from the long-run state.
    pub terminal_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
            max_horizon: 800,
            terminal_tol: 1e-6,
        }
    }
}

/// Aggregate responses implied by a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub emissions: f64,
    pub real_gdp: f64,
    pub intensity: f64,
}

impl Aggregates {
    pub fn of(
        state: &crate::model::HatState,
        g_hat: &[f64],
        calib: &crate::calibration::Calibration,
    ) -> crate::error::Result<Self> {
        let emissions = crate::model::emissions_hat(
            state,
            crate::model::fuel_government_hat(calib, g_hat),
            calib,
        )?;
        let real_gdp = crate::model::real_gdp_hat(state, g_hat, calib)?;
        Ok(Self {
            emissions,
            real_gdp,
            intensity: emissions / real_gdp,
        })
    }
}
