//! Panel local projections of outcomes on spending shocks.

mod design;
pub mod dk;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PanelVariable};
use crate::shocks::{ShockSeries, ShockSet};
use design::{FeDesign, FeRow};
pub use dk::driscoll_kraay_cov;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlTransform {
    /// `100 (ln v_s - ln v_{s-1})`
    LogDiff,
    Level,
}

/// A control variable entering at `t - lag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Control {
    pub variable: PanelVariable,
    pub transform: ControlTransform,
    pub lag: usize,
}

impl Control {
    fn name(&self) -> String {
        let t = match self.transform {
            ControlTransform::LogDiff => "dlog_",
            ControlTransform::Level => "",
        };
        format!("{t}{}_l{}", self.variable.name(), self.lag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSpec {
    /// Largest horizon; horizons `0..=horizon` are estimated.
    pub horizon: usize,
    /// Lags of the outcome change.
    pub lags: usize,
    pub controls: Vec<Control>,
    pub country_fe: bool,
    pub year_fe: bool,
    pub ci_level: f64,
    pub dk_lags: usize,
}

impl LpSpec {
    pub fn default_controls() -> Vec<Control> {
        use ControlTransform::*;
        use PanelVariable::*;
        vec![
            Control {
                variable: GdpPc,
                transform: LogDiff,
                lag: 1,
            },
            Control {
                variable: GdpPc,
                transform: LogDiff,
                lag: 2,
            },
            Control {
                variable: Exports,
                transform: LogDiff,
                lag: 1,
            },
            Control {
                variable: Imports,
                transform: LogDiff,
                lag: 1,
            },
            Control {
                variable: Democracy,
                transform: Level,
                lag: 1,
            },
        ]
    }
}

impl Default for LpSpec {
    fn default() -> Self {
        Self {
            horizon: 15,
            lags: 2,
            controls: Self::default_controls(),
            country_fe: true,
            year_fe: true,
            ci_level: 0.68,
            dk_lags: 2,
        }
    }
}

/// Outcome variable and its scale. Log outcomes are `100 ln y`; the spending
/// share is converted to percentage points; other levels are used as is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub variable: PanelVariable,
    pub log: bool,
}

impl Outcome {
    pub fn log(variable: PanelVariable) -> Self {
        Self {
            variable,
            log: true,
        }
    }

    pub fn level(variable: PanelVariable) -> Self {
        Self {
            variable,
            log: false,
        }
    }

    /// Transformed value, or `Err(())` when a log outcome is non-positive.
    fn transform(&self, v: f64) -> std::result::Result<f64, ()> {
        if self.log {
            if v > 0.0 {
                Ok(100.0 * v.ln())
            } else {
                Err(())
            }
        } else if self.variable == PanelVariable::MilShare {
            Ok(100.0 * v)
        } else {
            Ok(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrfResult {
    pub horizons: Vec<usize>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub n_obs: Vec<usize>,
    pub ci_level: f64,
    /// Country-years dropped because a log outcome was non-positive.
    pub dropped_nonpositive: usize,
}

impl IrfResult {
    fn from_estimates(est: Vec<(f64, f64, usize)>, ci_level: f64, dropped: usize) -> Result<Self> {
        let z = normal_quantile(ci_level)?;
        let mut r = IrfResult {
            horizons: (0..est.len()).collect(),
            beta: Vec::new(),
            se: Vec::new(),
            ci_lo: Vec::new(),
            ci_hi: Vec::new(),
            n_obs: Vec::new(),
            ci_level,
            dropped_nonpositive: dropped,
        };
        for (b, var, n) in est {
            let se = var.max(0.0).sqrt();
            r.beta.push(b);
            r.se.push(se);
            r.ci_lo.push(b - z * se);
            r.ci_hi.push(b + z * se);
            r.n_obs.push(n);
        }
        Ok(r)
    }

    /// `h,beta,se,lo,hi,n`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["h", "beta", "se", "lo", "hi", "n"])?;
        for h in 0..self.horizons.len() {
            w.write_record([
                self.horizons[h].to_string(),
                self.beta[h].to_string(),
                self.se[h].to_string(),
                self.ci_lo[h].to_string(),
                self.ci_hi[h].to_string(),
                self.n_obs[h].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Long-format `series,h,statistic,value` rows for plotting.
pub fn write_plotdata(path: &Path, series: &[(&str, &IrfResult)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "h", "statistic", "value"])?;
    for (name, irf) in series {
        for h in 0..irf.horizons.len() {
            for (stat, v) in [
                ("beta", irf.beta[h]),
                ("ci_lo", irf.ci_lo[h]),
                ("ci_hi", irf.ci_hi[h]),
            ] {
                w.write_record([
                    name.to_string(),
                    irf.horizons[h].to_string(),
                    stat.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityGroup {
    High,
    Low,
}

/// Countries split at the median of their mean emission intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupClassification {
    pub groups: BTreeMap<String, IntensityGroup>,
    pub mean_intensity: BTreeMap<String, f64>,
    pub median: f64,
}

impl GroupClassification {
    pub fn group(&self, country: &str) -> Option<IntensityGroup> {
        self.groups.get(country).copied()
    }

    pub fn members(&self, g: IntensityGroup) -> Vec<String> {
        self.groups
            .iter()
            .filter(|(_, v)| **v == g)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Mean emissions per unit of real GDP by country; strictly above the median
/// is HIGH, the rest (ties included) LOW. Countries with no observed
/// intensity are left unclassified.
pub fn classify_emission_intensity(panel: &PanelDataset) -> Result<GroupClassification> {
    let mut mean_intensity = BTreeMap::new();
    for c in panel.countries() {
        let vals: Vec<f64> = panel
            .country_rows(c)
            .iter()
            .filter_map(|o| PanelVariable::EmissionIntensity.value(o))
            .filter(|v| v.is_finite())
            .collect();
        if !vals.is_empty() {
            mean_intensity.insert(c.clone(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    if mean_intensity.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} countries with emission intensity, need at least 2",
            mean_intensity.len()
        )));
    }
    let mut sorted: Vec<f64> = mean_intensity.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let groups = mean_intensity
        .iter()
        .map(|(c, &v)| {
            let g = if v > median {
                IntensityGroup::High
            } else {
                IntensityGroup::Low
            };
            (c.clone(), g)
        })
        .collect();
    Ok(GroupClassification {
        groups,
        mean_intensity,
        median,
    })
}

struct CountryData {
    outcome: BTreeMap<i32, f64>,
    nonpositive: BTreeSet<i32>,
    controls: Vec<BTreeMap<i32, f64>>,
    shocks: BTreeMap<i32, f64>,
    group: usize,
}

struct Prepared {
    countries: Vec<CountryData>,
    years: Vec<i32>,
    n_groups: usize,
}

fn prepare(
    panel: &PanelDataset,
    shocks: &ShockSet,
    outcome: Outcome,
    spec: &LpSpec,
    group_of: &dyn Fn(&str) -> Option<usize>,
    n_groups: usize,
) -> Prepared {
    let mut countries = Vec::new();
    for c in panel.countries() {
        let (Some(series), Some(group)) = (shocks.0.get(c), group_of(c)) else {
            continue;
        };
        let rows = panel.country_rows(c);
        let mut data = CountryData {
            outcome: BTreeMap::new(),
            nonpositive: BTreeSet::new(),
            controls: Vec::new(),
            shocks: series.shocks.clone(),
            group,
        };
        for o in rows {
            if let Some(v) = outcome.variable.value(o) {
                match outcome.transform(v) {
                    Ok(y) if y.is_finite() => {
                        data.outcome.insert(o.year, y);
                    }
                    Ok(_) => {}
                    Err(()) => {
                        data.nonpositive.insert(o.year);
                    }
                }
            }
        }
        for ctrl in &spec.controls {
            let raw: BTreeMap<i32, f64> = rows
                .iter()
                .filter_map(|o| Some((o.year, ctrl.variable.value(o)?)))
                .collect();
            let m = match ctrl.transform {
                ControlTransform::Level => raw,
                ControlTransform::LogDiff => raw
                    .iter()
                    .filter_map(|(&t, &v)| {
                        let p = *raw.get(&(t - 1))?;
                        (v > 0.0 && p > 0.0).then(|| (t, 100.0 * (v.ln() - p.ln())))
                    })
                    .collect(),
            };
            data.controls.push(m);
        }
        countries.push(data);
    }
    Prepared {
        countries,
        years: panel.years().to_vec(),
        n_groups,
    }
}

/// Dense regressors for one country-year: shock, controls, outcome lags.
fn dense_row(
    c: &CountryData,
    t: i32,
    h: usize,
    spec: &LpSpec,
) -> std::result::Result<(f64, Vec<f64>), bool> {
    let s = *c.shocks.get(&t).ok_or(false)?;
    let lead = t + h as i32;
    let (Some(yh), Some(y0)) = (c.outcome.get(&lead), c.outcome.get(&(t - 1))) else {
        return Err(c.nonpositive.contains(&lead) || c.nonpositive.contains(&(t - 1)));
    };
    let mut dense = Vec::with_capacity(1 + spec.controls.len() + spec.lags);
    dense.push(s);
    for (ctrl, m) in spec.controls.iter().zip(&c.controls) {
        dense.push(*m.get(&(t - ctrl.lag as i32)).ok_or(false)?);
    }
    for j in 1..=spec.lags as i32 {
        let a = c.outcome.get(&(t - j)).ok_or(false)?;
        let b = c.outcome.get(&(t - j - 1)).ok_or(false)?;
        dense.push(a - b);
    }
    Ok((yh - y0, dense))
}

fn dense_names(spec: &LpSpec) -> Vec<String> {
    let mut names = vec!["shock".to_string()];
    names.extend(spec.controls.iter().map(Control::name));
    names.extend((1..=spec.lags).map(|j| format!("dy_l{j}")));
    names
}

/// Fits horizon `h` with every dense regressor and year effect interacted
/// with the country's group. Returns per group `(beta, var, n)` of the shock.
fn fit_horizon(p: &Prepared, spec: &LpSpec, h: usize) -> Result<Vec<(f64, f64, usize)>> {
    let base = dense_names(spec);
    let k = base.len();
    let g = p.n_groups;
    let names: Vec<String> = if g == 1 {
        base
    } else {
        (0..g)
            .flat_map(|gi| base.iter().map(move |n| format!("{n}[g{gi}]")))
            .collect()
    };
    let with_const = !spec.country_fe && !spec.year_fe;
    let mut names = names;
    if with_const {
        names.extend((0..g).map(|gi| {
            if g == 1 {
                "const".to_string()
            } else {
                format!("const[g{gi}]")
            }
        }));
    }
    let nc = p.countries.len();
    let ny = p.years.len();
    let y0 = p.years.first().copied().unwrap_or(0);

    let mut rows = Vec::new();
    let mut n_by_group = vec![0usize; g];
    for (ci, c) in p.countries.iter().enumerate() {
        for &t in c.shocks.keys() {
            let Ok((y, d)) = dense_row(c, t, h, spec) else {
                continue;
            };
            let mut dense = vec![0.0; names.len()];
            dense[c.group * k..(c.group + 1) * k].copy_from_slice(&d);
            if with_const {
                dense[g * k + c.group] = 1.0;
            }
            let mut dummies = Vec::with_capacity(2);
            if spec.country_fe {
                dummies.push(ci);
            }
            if spec.year_fe {
                dummies.push(nc + c.group * ny + (t - y0) as usize);
            }
            n_by_group[c.group] += 1;
            rows.push(FeRow {
                y,
                dense,
                dummies,
                time: t as i64,
            });
        }
    }
    if let Some(gi) = n_by_group.iter().position(|&n| n == 0) {
        return Err(Error::InsufficientData(format!(
            "no usable observations at horizon {h} in group {gi}"
        )));
    }
    if spec.country_fe && spec.year_fe {
        // one year effect per group is absorbed by the country effects
        for gi in 0..g {
            let first = rows
                .iter()
                .filter(|r| group_of_row(r, nc, ny) == Some(gi))
                .filter_map(|r| r.dummies.get(1).copied())
                .min();
            if let Some(first) = first {
                for r in rows.iter_mut() {
                    if r.dummies.get(1) == Some(&first) {
                        r.dummies.truncate(1);
                    }
                }
            }
        }
    }
    let mut design = FeDesign::new(names, nc + g * ny);
    design.rows = rows;
    let fit = design.fit(spec.dk_lags)?;
    Ok((0..g)
        .map(|gi| {
            (
                fit.dense_coef[gi * k],
                fit.dense_cov[(gi * k, gi * k)],
                n_by_group[gi],
            )
        })
        .collect())
}

fn group_of_row(r: &FeRow, nc: usize, ny: usize) -> Option<usize> {
    r.dummies.get(1).map(|&d| (d - nc) / ny)
}

fn check_spec(spec: &LpSpec) -> Result<()> {
    normal_quantile(spec.ci_level)?;
    Ok(())
}

fn run(
    panel: &PanelDataset,
    shocks: &ShockSet,
    outcome: Outcome,
    spec: &LpSpec,
    group_of: &dyn Fn(&str) -> Option<usize>,
    n_groups: usize,
) -> Result<Vec<IrfResult>> {
    check_spec(spec)?;
    let prepared = prepare(panel, shocks, outcome, spec, group_of, n_groups);
    if prepared.countries.is_empty() {
        return Err(Error::InsufficientData(
            "no country has both outcome data and shocks".into(),
        ));
    }
    let per_h: Vec<Vec<(f64, f64, usize)>> = (0..=spec.horizon)
        .into_par_iter()
        .map(|h| fit_horizon(&prepared, spec, h))
        .collect::<Result<_>>()?;
    let mut dropped = 0;
    for c in &prepared.countries {
        dropped += c.nonpositive.len();
    }
    (0..n_groups)
        .map(|gi| {
            let est = per_h.iter().map(|v| v[gi]).collect();
            IrfResult::from_estimates(est, spec.ci_level, dropped)
        })
        .collect()
}

/// Impulse response of `outcome` to a one percentage point shock, one
/// regression per horizon with Driscoll-Kraay standard errors.
pub fn estimate_lp(
    panel: &PanelDataset,
    shocks: &ShockSet,
    outcome: Outcome,
    spec: &LpSpec,
) -> Result<IrfResult> {
    let mut r = run(panel, shocks, outcome, spec, &|_| Some(0), 1)?;
    Ok(r.remove(0))
}

/// Fully interacted regression with group-specific coefficients and year
/// effects. Returns `(high, low)`.
pub fn split_lp(
    panel: &PanelDataset,
    shocks: &ShockSet,
    outcome: Outcome,
    spec: &LpSpec,
    groups: &GroupClassification,
) -> Result<(IrfResult, IrfResult)> {
    for g in [IntensityGroup::High, IntensityGroup::Low] {
        let present = groups
            .members(g)
            .iter()
            .filter(|c| shocks.0.contains_key(*c) && !panel.country_rows(c).is_empty())
            .count();
        if present < 2 {
            return Err(Error::InsufficientData(format!(
                "{present} countries in the {g:?} group, need at least 2"
            )));
        }
    }
    let group_of = |c: &str| {
        groups.group(c).map(|g| match g {
            IntensityGroup::High => 0,
            IntensityGroup::Low => 1,
        })
    };
    let mut r = run(panel, shocks, outcome, spec, &group_of, 2)?;
    let low = r.pop().expect("two groups");
    let high = r.pop().expect("two groups");
    Ok((high, low))
}

/// Responses of `allies` to one source country's shock series.
pub fn spillover_lp(
    panel: &PanelDataset,
    allies: &[String],
    source: &ShockSeries,
    outcome: Outcome,
    spec: &LpSpec,
) -> Result<IrfResult> {
    let sub = panel.restrict(allies)?;
    let shocks = ShockSet::replicate(source, allies);
    estimate_lp(&sub, &shocks, outcome, spec)
}
