mod common;

use common::{dk_double_sum, hump_panel, hump_truth};
use milspend_core::lp::{driscoll_kraay_cov, write_plotdata};
use milspend_core::synthetic::{intensity_panel, nato_panel};
use milspend_core::{
    classify_emission_intensity, estimate_lp, extract_shocks, spillover_lp, split_lp, Error,
    IntensityGroup, LpSpec, Outcome, PanelDataset, PanelObservation, PanelVariable, SeriesKind,
    ShockSet,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bare_spec(horizon: usize) -> LpSpec {
    LpSpec {
        horizon,
        controls: vec![],
        ..Default::default()
    }
}

fn gdp() -> Outcome {
    Outcome::log(PanelVariable::RealGdp)
}

#[test]
fn driscoll_kraay_matches_double_sum_on_micro_panel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for lags in 0..4 {
        let time: Vec<i64> = (0..3).flat_map(|_| 0..6).collect();
        let x = DMatrix::from_fn(18, 3, |_, c| {
            if c == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let u: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = driscoll_kraay_cov(&u, &x, &time, lags).unwrap();
        let b = dk_double_sum(&x, &u, &time, lags);
        assert!((a - b).amax() < 1e-12);
    }
}

#[test]
fn driscoll_kraay_needs_enough_periods() {
    let x = DMatrix::from_element(4, 1, 1.0);
    assert!(driscoll_kraay_cov(&[1.0, -1.0, 1.0, -1.0], &x, &[0, 0, 1, 1], 2).is_err());
}

#[test]
fn recovers_hump_on_one_draw() {
    let (p, s) = hump_panel(40, 200, 1, &|_| 1.0);
    let irf = estimate_lp(&p, &s, gdp(), &bare_spec(12)).unwrap();
    for h in 0..=12 {
        assert!(
            (irf.beta[h] - hump_truth(h)).abs() < 0.25,
            "h={h}: {}",
            irf.beta[h]
        );
        assert!(irf.ci_lo[h] < irf.beta[h] && irf.beta[h] < irf.ci_hi[h]);
    }
    assert_eq!(irf.horizons, (0..=12).collect::<Vec<_>>());
    // each horizon loses one more year at the end
    assert!(irf.n_obs.windows(2).all(|w| w[0] == w[1] + 40));
}

#[test]
fn nonpositive_log_outcomes_are_counted() {
    let (p, s) = hump_panel(5, 40, 2, &|_| 1.0);
    let mut rows: Vec<PanelObservation> = p.rows().to_vec();
    rows[7].real_gdp = Some(0.0);
    rows[60].real_gdp = Some(-1.0);
    let p2 = PanelDataset::from_observations(rows).unwrap();
    let spec = bare_spec(2);
    match estimate_lp(&p2, &s, gdp(), &spec) {
        Ok(irf) => {
            assert_eq!(irf.dropped_nonpositive + p2.rejected.len(), 2);
            let full = estimate_lp(&p, &s, gdp(), &spec).unwrap();
            assert!(irf.n_obs[0] < full.n_obs[0]);
        }
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn spillover_requires_year_effects_off() {
    let p = nato_panel(4).unwrap();
    let shocks = extract_shocks(&p, SeriesKind::LevelShare, 2, 2).unwrap();
    let source = shocks.0["C00"].clone();
    let allies: Vec<String> = p.countries()[1..].to_vec();
    let spec = LpSpec {
        horizon: 4,
        ..Default::default()
    };
    match spillover_lp(&p, &allies, &source, gdp(), &spec) {
        Err(Error::RankDeficient(msg)) => assert!(msg.contains("shock")),
        other => panic!("{other:?}"),
    }
    let spec = LpSpec {
        year_fe: false,
        ..spec
    };
    let irf = spillover_lp(&p, &allies, &source, gdp(), &spec).unwrap();
    assert!(irf.beta.iter().all(|b| b.is_finite()));
}

#[test]
fn classification_splits_at_median() {
    let p = intensity_panel(5).unwrap();
    let g = classify_emission_intensity(&p).unwrap();
    assert_eq!(g.members(IntensityGroup::High).len(), 19);
    assert_eq!(g.members(IntensityGroup::Low).len(), 19);
    for (c, v) in &g.mean_intensity {
        assert_eq!(g.group(c) == Some(IntensityGroup::High), *v > g.median);
    }
}

#[test]
fn split_groups_match_separate_regressions() {
    let (p, s) = hump_panel(12, 300, 6, &|c| if c >= 6 { 2.0 } else { 0.0 });
    let groups = classify_emission_intensity(&p).unwrap();
    let spec = bare_spec(8);
    let (high, low) = split_lp(&p, &s, gdp(), &spec, &groups).unwrap();
    for (g, irf) in [(IntensityGroup::High, &high), (IntensityGroup::Low, &low)] {
        let sub = p.restrict(&groups.members(g)).unwrap();
        let alone = estimate_lp(&sub, &s, gdp(), &spec).unwrap();
        for h in 0..=8 {
            assert!((irf.beta[h] - alone.beta[h]).abs() < 1e-8);
            assert!((irf.se[h] - alone.se[h]).abs() < 1e-8);
            assert_eq!(irf.n_obs[h], alone.n_obs[h]);
        }
    }
    assert!(
        (high.beta[6] - 4.0).abs() < 0.5 && low.beta[6].abs() < 0.5,
        "{:?} {:?}",
        high.beta,
        low.beta
    );
}

#[test]
fn split_needs_two_countries_per_group() {
    let (p, s) = hump_panel(3, 40, 7, &|_| 1.0);
    let groups = classify_emission_intensity(&p).unwrap();
    assert!(split_lp(&p, &s, gdp(), &bare_spec(2), &groups).is_err());
}

#[test]
fn default_controls_run_on_full_panel() {
    let p = nato_panel(8).unwrap();
    let shocks = extract_shocks(&p, SeriesKind::GordonKrenn, 2, 2).unwrap();
    let irf = estimate_lp(
        &p,
        &shocks,
        Outcome::log(PanelVariable::Emissions),
        &LpSpec::default(),
    )
    .unwrap();
    assert_eq!(irf.beta.len(), 16);
    assert!(irf.se.iter().all(|s| *s > 0.0));
    let share = estimate_lp(
        &p,
        &shocks,
        Outcome::level(PanelVariable::MilShare),
        &LpSpec {
            horizon: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(share.beta[0] > 0.0);
}

#[test]
fn bad_confidence_level_is_rejected() {
    let (p, s) = hump_panel(4, 30, 9, &|_| 1.0);
    assert!(estimate_lp(
        &p,
        &s,
        gdp(),
        &LpSpec {
            ci_level: 1.0,
            ..bare_spec(1)
        }
    )
    .is_err());
}

#[test]
fn outputs_write_expected_headers() {
    let (p, s) = hump_panel(6, 40, 10, &|_| 1.0);
    let irf = estimate_lp(&p, &s, gdp(), &bare_spec(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("irf.csv");
    irf.write_csv(&a).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("h,beta,se,lo,hi,n\n"));
    assert_eq!(text.lines().count(), 5);
    let b = dir.path().join("plot.csv");
    write_plotdata(&b, &[("gdp", &irf)]).unwrap();
    assert_eq!(
        std::fs::read_to_string(&b).unwrap().lines().count(),
        1 + 4 * 3
    );
}

fn with_effects(
    p: &PanelDataset,
    country: &dyn Fn(usize) -> f64,
    year: &dyn Fn(i32) -> f64,
) -> PanelDataset {
    let names = p.countries().to_vec();
    let rows = p
        .rows()
        .iter()
        .map(|o| {
            let ci = names.iter().position(|c| *c == o.country).unwrap();
            PanelObservation {
                real_gdp: o.real_gdp.map(|v| v * country(ci) * year(o.year)),
                ..o.clone()
            }
        })
        .collect();
    PanelDataset::from_observations(rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fixed_effects_absorb_country_and_year_levels(seed in 0u64..1000, a in 0.5f64..2.0, b in 0.5f64..2.0) {
        let (p, s) = hump_panel(6, 30, seed, &|_| 1.0);
        let spec = bare_spec(3);
        let base = estimate_lp(&p, &s, gdp(), &spec).unwrap();
        let shifted = with_effects(&p, &|c| a.powi(c as i32), &|t| b.powi(t - 1800));
        let irf = estimate_lp(&shifted, &s, gdp(), &spec).unwrap();
        for h in 0..=3 {
            prop_assert!((base.beta[h] - irf.beta[h]).abs() < 1e-7);
            prop_assert!((base.se[h] - irf.se[h]).abs() < 1e-7);
        }
    }

    #[test]
    fn shock_units_rescale_coefficients(seed in 0u64..1000, k in 0.1f64..10.0) {
        let (p, s) = hump_panel(5, 30, seed, &|_| 1.0);
        let mut scaled = ShockSet::default();
        for series in s.0.values() {
            let mut c = series.clone();
            c.shocks.values_mut().for_each(|v| *v *= k);
            scaled.insert(c);
        }
        let spec = bare_spec(2);
        let a = estimate_lp(&p, &s, gdp(), &spec).unwrap();
        let b = estimate_lp(&p, &scaled, gdp(), &spec).unwrap();
        for h in 0..=2 {
            prop_assert!((a.beta[h] - k * b.beta[h]).abs() < 1e-8 * a.beta[h].abs().max(1.0));
        }
    }
}
