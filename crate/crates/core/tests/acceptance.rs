//! Acceptance checks, one PASS/FAIL line each. Tolerances are fixed here.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{
    base_government, dk_double_sum, hump_panel, hump_truth, level_ratios,
    normal_equation_residuals, LevelModel,
};
use milspend_core::calibration::RawInputs;
use milspend_core::lp::driscoll_kraay_cov;
use milspend_core::scenario::{parse_grid, sweep};
use milspend_core::solve::Aggregates;
use milspend_core::synthetic::{random_economy, random_inputs, DEFAULT_SEED};
use milspend_core::{
    estimate_lp, extract_shocks, government_path, scc_damages, solve_steady, solve_transition,
    Calibration, DamageSpec, GovernmentPath, HatState, LpSpec, Outcome, PanelDataset,
    PanelObservation, PanelVariable, Preset, ScenarioSpec, SeriesKind, SolverOptions,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

const HAMILTON_TOL: f64 = 1e-10;
const HAMILTON_TIME: Duration = Duration::from_secs(1);
const LP_BIAS_TOL: f64 = 0.1;
const LP_TIME: Duration = Duration::from_secs(120);
const LP_REPS: u64 = 200;
const DK_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-12;
const LEVEL_TOL: f64 = 1e-8;
const INVARIANT_TOL: f64 = 1e-10;
const TRANSITION_TOL: f64 = 1e-6;
const DECOMPOSITION_TOL: f64 = 1e-14;
const DAMAGE_REL_TOL: f64 = 0.01;

type Verdict = Result<String, String>;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_calibration() -> Result<Calibration, String> {
    RawInputs::load(&fixture_dir().join("io"))
        .and_then(|r| r.build())
        .map_err(|e| format!("fixture: {e}"))
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Forty AR(2) military shares; shocks against a normal-equations oracle.
fn hamilton() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let innov = Normal::new(0.0, 0.003).unwrap();
    let mut obs = Vec::new();
    for c in 0..40 {
        let mut m = vec![0.03, 0.03];
        for t in 2..60 {
            m.push(
                0.03 + 1.2 * (m[t - 1] - 0.03) - 0.3 * (m[t - 2] - 0.03) + innov.sample(&mut rng),
            );
        }
        for (t, v) in m.into_iter().enumerate() {
            obs.push(PanelObservation {
                country: format!("A{c:02}"),
                year: 1950 + t as i32,
                mil_share: Some(v),
                ..Default::default()
            });
        }
    }
    let panel = PanelDataset::from_observations(obs).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let shocks = extract_shocks(&panel, SeriesKind::LevelShare, 2, 2).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut err = 0.0f64;
    for c in panel.countries() {
        let rows = panel.country_rows(c);
        let (mut y, mut x) = (vec![], vec![]);
        for t in 2..rows.len() - 2 {
            y.push(rows[t + 2].mil_share.unwrap());
            x.push(vec![
                1.0,
                rows[t].mil_share.unwrap(),
                rows[t - 1].mil_share.unwrap(),
                rows[t - 2].mil_share.unwrap(),
            ]);
        }
        let want = normal_equation_residuals(&y, &x);
        let got: Vec<f64> = shocks.0[c].shocks.values().copied().collect();
        if got.len() != want.len() {
            return Err(format!(
                "{c}: {} shocks, oracle has {}",
                got.len(),
                want.len()
            ));
        }
        for (g, w) in got.iter().zip(&want) {
            err = err.max((g - 100.0 * w).abs());
        }
    }
    check(
        err < HAMILTON_TOL && elapsed < HAMILTON_TIME,
        format!(
            "max abs error {err:.2e} (tol {HAMILTON_TOL:.0e}), {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Mean LP estimate over simulated panels with a hump-shaped response.
fn lp_recovery() -> Verdict {
    let spec = LpSpec {
        horizon: 12,
        controls: vec![],
        ..Default::default()
    };
    let start = Instant::now();
    let betas: Vec<Vec<f64>> = (0..LP_REPS)
        .into_par_iter()
        .map(|rep| {
            let (panel, shocks) = hump_panel(40, 200, DEFAULT_SEED + rep, &|_| 1.0);
            estimate_lp(&panel, &shocks, Outcome::log(PanelVariable::RealGdp), &spec)
                .map(|r| r.beta)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for h in 0..=12 {
        let mean = betas.iter().map(|b| b[h]).sum::<f64>() / betas.len() as f64;
        worst = worst.max((mean - hump_truth(h)).abs());
    }
    check(
        worst < LP_BIAS_TOL && elapsed < LP_TIME,
        format!(
            "max |mean - truth| {worst:.4} over {LP_REPS} reps (tol {LP_BIAS_TOL}), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn driscoll_kraay() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let time: Vec<i64> = (0..3).flat_map(|_| 0..6).collect();
    let x = DMatrix::from_fn(18, 3, |_, c| {
        if c == 0 {
            1.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    let u: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut err = 0.0f64;
    for lags in 0..=3 {
        let a = driscoll_kraay_cov(&u, &x, &time, lags).map_err(|e| e.to_string())?;
        err = err.max((a - dk_double_sum(&x, &u, &time, lags)).amax());
    }
    check(
        err < DK_TOL,
        format!("max abs difference {err:.2e} (tol {DK_TOL:.0e})"),
    )
}

fn zero_shock(aggregates: &mut Vec<Aggregates>) -> Verdict {
    let mut worst_gap = 0.0f64;
    let mut worst_res = 0.0f64;
    for k in 0..50u64 {
        let n = 2 + (k as usize % 9);
        let c = random_inputs(n, DEFAULT_SEED + k)
            .and_then(|r| r.build())
            .map_err(|e| e.to_string())?;
        let s = solve_steady(&c, &vec![1.0; n]).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max(s.state.max_log_gap(&HatState::ones(n)));
        worst_res = worst_res.max(s.residual_norm);
        aggregates.push(s.aggregates);
    }
    check(
        worst_gap == 0.0 && worst_res < FIXED_POINT_TOL,
        format!("max |ln hat| {worst_gap:.1e}, max residual {worst_res:.1e} (tol {FIXED_POINT_TOL:.0e})"),
    )
}

fn level_oracle(aggregates: &mut Vec<Aggregates>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let model = LevelModel::new(random_economy(n, &mut rng));
        let g0 = base_government(&model);
        let base = model.solve(&g0);
        let calib = model.inputs(&base).build().map_err(|e| e.to_string())?;
        let g_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let level = model.solve(
            &g0.iter()
                .zip(&g_hat)
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        let s = solve_steady(&calib, &g_hat).map_err(|e| e.to_string())?;
        worst = worst.max(s.state.max_log_gap(&level_ratios(&base, &level)));
        aggregates.push(s.aggregates);
    }
    check(
        worst < LEVEL_TOL,
        format!("max |ln hat - ln ratio| {worst:.2e} (tol {LEVEL_TOL:.0e})"),
    )
}

fn calibration_invariants() -> Verdict {
    let c = fixture_calibration()?;
    let n = c.n;
    let mut worst = 0.0f64;
    let mut note = |v: f64| worst = worst.max((v - 1.0).abs());
    for i in 0..n {
        note(c.omega.column(i).sum());
        note(c.chi.column(i).sum());
        note(c.delta.row(i).sum() + c.iota.row(i).sum() + c.phi[i] + c.gamma[i]);
    }
    note(c.lambda.iter().sum());
    note(c.beta_cons.iter().sum());
    note(c.eps_ind.iter().sum::<f64>() + c.eps_hh + c.eps_govt);
    let maintained = (0..n).all(|j| c.chi[(j, j)] >= 0.125 - INVARIANT_TOL);
    check(
        n == 41 && worst < INVARIANT_TOL && maintained && c.validate(INVARIANT_TOL).is_ok(),
        format!("{n} industries, max share-sum error {worst:.2e} (tol {INVARIANT_TOL:.0e}), chi diagonal >= 0.125: {maintained}"),
    )
}

fn transition(aggregates: &mut Vec<Aggregates>) -> Verdict {
    let c = fixture_calibration()?;
    let opts = SolverOptions::default();
    let perm = government_path(&ScenarioSpec::preset(Preset::Baseline, 1.0, 1.0), &c)
        .map_err(|e| e.to_string())?;
    let steady = solve_steady(&c, &perm.terminal()).map_err(|e| e.to_string())?;
    let t1 = solve_transition(&c, &perm, 200, &opts).map_err(|e| e.to_string())?;
    let gap1 = t1.path.last().unwrap().max_log_gap(&steady.state);
    let temp: GovernmentPath =
        government_path(&ScenarioSpec::preset(Preset::Baseline, 1.0, 0.86), &c)
            .map_err(|e| e.to_string())?;
    let t2 = solve_transition(&c, &temp, 200, &opts).map_err(|e| e.to_string())?;
    let gap2 = t2
        .path
        .get(199)
        .map(|s| s.max_log_gap(&HatState::ones(c.n)))
        .unwrap_or(f64::INFINITY);
    aggregates.push(steady.aggregates);
    aggregates.extend(t1.aggregates.iter().chain(&t2.aggregates).copied());
    check(
        gap1 < TRANSITION_TOL && gap2 < TRANSITION_TOL,
        format!("rho=1 final vs steady {gap1:.2e}; rho=0.86 at T=200 vs initial {gap2:.2e} (tol {TRANSITION_TOL:.0e})"),
    )
}

fn decomposition(aggregates: &[Aggregates]) -> Verdict {
    let worst = aggregates
        .iter()
        .map(|a| (a.emissions.ln() - a.real_gdp.ln() - a.intensity.ln()).abs())
        .fold(0.0f64, f64::max);
    check(
        worst < DECOMPOSITION_TOL && !aggregates.is_empty(),
        format!(
            "{} solver outputs, max |ln E - ln Y - ln I| {worst:.1e} (tol {DECOMPOSITION_TOL:.0e})",
            aggregates.len()
        ),
    )
}

fn damages() -> Verdict {
    let mut lines = Vec::new();
    let mut ok = true;
    for (scc, delta, want) in [
        (190.0, 1.18, 13.65e9),
        (190.0, 6.0, 69.4e9),
        (1367.0, 1.18, 98.2e9),
        (1367.0, 6.0, 500e9),
    ] {
        let d = DamageSpec {
            scc,
            base_emissions: 6.09e9,
            ..Default::default()
        };
        let got = scc_damages(delta, &d)
            .map_err(|e| e.to_string())?
            .damages_per_year;
        ok &= (got / want - 1.0).abs() < DAMAGE_REL_TOL;
        lines.push(format!("{:.2}bn", got / 1e9));
    }
    check(
        ok,
        format!("{} (rel tol {DAMAGE_REL_TOL})", lines.join(", ")),
    )
}

fn scenario_ordering() -> Verdict {
    let c = fixture_calibration()?;
    let grid = parse_grid("0:10.6:0.53")?;
    let presets = [Preset::Personnel, Preset::Baseline, Preset::Material];
    let pts = sweep(&c, &presets, &grid, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let m = grid.len();
    let curve = |k: usize| {
        pts[k * m..(k + 1) * m]
            .iter()
            .map(|p| p.emissions_pct)
            .collect::<Vec<_>>()
    };
    let (pers, base, mat) = (curve(0), curve(1), curve(2));
    let ordered = (0..m).all(|i| mat[i] >= base[i] && base[i] >= pers[i]);
    let increasing = [&pers, &base, &mat]
        .iter()
        .all(|c| c.windows(2).all(|w| w[1] > w[0]));
    check(
        ordered && increasing && grid.last().is_some_and(|e| (e - 10.6).abs() < 1e-9),
        format!(
            "{m} grid points; at 10.6 p.p. personnel {:.2}%, baseline {:.2}%, material {:.2}%; ordered {ordered}, increasing {increasing}",
            pers[m - 1], base[m - 1], mat[m - 1]
        ),
    )
}

fn main() {
    let mut aggregates = Vec::new();
    let results: Vec<(&str, Verdict)> = vec![
        ("1 hamilton shocks vs OLS oracle", hamilton()),
        ("2 LP recovery of a known hump", lp_recovery()),
        ("3 Driscoll-Kraay vs double-sum oracle", driscoll_kraay()),
        ("4 zero-shock fixed point", zero_shock(&mut aggregates)),
        (
            "5 hat model vs level-space equilibria",
            level_oracle(&mut aggregates),
        ),
        (
            "6 calibration invariants on fixture",
            calibration_invariants(),
        ),
        ("7 transition vs steady state", transition(&mut aggregates)),
        (
            "8 emissions decomposition identity",
            decomposition(&aggregates),
        ),
        ("9 damage arithmetic", damages()),
        ("10 scenario ordering on fixture", scenario_ordering()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
