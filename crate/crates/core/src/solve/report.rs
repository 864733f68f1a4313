use serde::{Deserialize, Serialize};

use super::{solve_steady_with, SolverOptions, SteadySolution};
use crate::calibration::Calibration;
use crate::error::Result;
use crate::model::{GovernmentPath, HatState};

/// Separate steady states for the weapon and the energy part of a shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub weapon: SteadySolution,
    pub energy: SteadySolution,
    pub joint: SteadySolution,
    /// Joint emissions response minus the sum of the two component responses.
    pub nonlinearity_gap: f64,
}

/// Re-solves the steady state with only one shock component switched on.
pub fn decompose_shocks(
    calib: &Calibration,
    g_path: &GovernmentPath,
    opts: &SolverOptions,
) -> Result<Decomposition> {
    g_path.check(calib.n)?;
    let g = &g_path.impact;
    let only = |set: &[usize]| -> Vec<f64> {
        (0..calib.n)
            .map(|i| if set.contains(&i) { g[i] } else { 1.0 })
            .collect()
    };
    let weapon = solve_steady_with(calib, &only(&calib.weapon_set), opts)?;
    let energy = solve_steady_with(calib, &only(&calib.energy_set), opts)?;
    let joint = solve_steady_with(calib, g, opts)?;
    let nonlinearity_gap = (joint.aggregates.emissions - 1.0)
        - (weapon.aggregates.emissions - 1.0)
        - (energy.aggregates.emissions - 1.0);
    Ok(Decomposition {
        weapon,
        energy,
        joint,
        nonlinearity_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryChange {
    pub industry: String,
    pub output_change: f64,
    pub capital_change: f64,
    pub weapon: bool,
    pub energy: bool,
}

/// Output and capital changes (`hat - 1`) by industry, largest output gain
/// first.
pub fn industry_report(state: &HatState, calib: &Calibration) -> Vec<IndustryChange> {
    let mut rows: Vec<IndustryChange> = (0..calib.n)
        .map(|i| IndustryChange {
            industry: calib.labels[i].clone(),
            output_change: state.y[i] - 1.0,
            capital_change: state.k[i] - 1.0,
            weapon: calib.weapon_set.contains(&i),
            energy: calib.energy_set.contains(&i),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.output_change
            .total_cmp(&a.output_change)
            .then_with(|| a.industry.cmp(&b.industry))
    });
    rows
}
