//! Shared inputs for the benchmarks.

use milspend_core::synthetic::{nato_panel, us_like_inputs, DEFAULT_SEED};
use milspend_core::{extract_shocks, Calibration, PanelDataset, SeriesKind, ShockSet};

/// The synthetic 41-industry economy.
pub fn us_like() -> Calibration {
    us_like_inputs(DEFAULT_SEED)
        .and_then(|r| r.build())
        .expect("synthetic economy calibrates")
}

/// Twenty-country panel with its forecast-error shocks.
pub fn panel_with_shocks() -> (PanelDataset, ShockSet) {
    let panel = nato_panel(DEFAULT_SEED).expect("synthetic panel");
    let shocks = extract_shocks(&panel, SeriesKind::GordonKrenn, 2, 2).expect("shocks");
    (panel, shocks)
}
