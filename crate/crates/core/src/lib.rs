//! Military spending shocks, their macro and emissions effects, and a
//! multi-sector production network model of the same shocks.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod error;
pub mod kv;
pub mod linalg;
pub mod lp;
mod matrix_serde;
pub mod model;
pub mod panel;
pub mod scenario;
pub mod shocks;
pub mod solve;
pub mod synthetic;

pub use calibration::{build_calibration, Calibration, CalibrationConfig, UseTable};
pub use error::{Error, ErrorCategory, Result};
pub use lp::{
    classify_emission_intensity, estimate_lp, spillover_lp, split_lp, GroupClassification,
    IntensityGroup, IrfResult, LpSpec, Outcome,
};
pub use model::{
    dynamic_residuals, emissions_hat, real_gdp_hat, steady_residuals, GovernmentPath, HatState,
};
pub use panel::{
    load_panel, ColumnSchema, PanelDataset, PanelObservation, PanelVariable, SeriesKind,
};
pub use scenario::{government_path, scc_damages, DamageSpec, Preset, ScenarioSpec};
pub use shocks::{extract_shocks, hamilton_shocks, ShockSeries, ShockSet};
pub use solve::{
    solve_steady, solve_transition, SolverOptions, SteadySolution, TransitionSolution,
};
