//! Model parameters from input-output use tables, investment networks,
//! depreciation rates and emission levels.

mod io;

use std::collections::BTreeMap;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;

pub use io::{
    read_depreciation, read_emissions, read_investment_network, read_mapping, read_use_table,
    IndustryMapping, RawInputs,
};

const BALANCE_TOL: f64 = 1e-6;
const INVARIANT_TOL: f64 = 1e-10;

pub const DEFAULT_WEAPON_LABELS: [&str; 2] = [
    "Fabricated metal products",
    "Other transportation equipment",
];
pub const DEFAULT_ENERGY_LABELS: [&str; 2] = ["Utilities", "Petroleum and coal products"];

/// Industry-by-industry use table in base-year values. `intermediate[(i, j)]`
/// is the value of good `i` used by industry `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct UseTable {
    pub codes: Vec<String>,
    pub labels: Vec<String>,
    pub intermediate: DMatrix<f64>,
    pub labor_comp: Vec<f64>,
    pub capital_comp: Vec<f64>,
    pub household_final: Vec<f64>,
    pub government_final: Vec<f64>,
    pub investment_final: Vec<f64>,
    pub gross_output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceAdjustment {
    pub industry: String,
    /// gross output minus total uses before adjustment
    pub slack: f64,
    pub relative: f64,
}

impl UseTable {
    pub fn n(&self) -> usize {
        self.codes.len()
    }

    pub fn total_uses(&self, i: usize) -> f64 {
        self.intermediate.row(i).sum()
            + self.household_final[i]
            + self.government_final[i]
            + self.investment_final[i]
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.n();
        let vecs = [
            &self.labor_comp,
            &self.capital_comp,
            &self.household_final,
            &self.government_final,
            &self.investment_final,
            &self.gross_output,
        ];
        if self.labels.len() != n
            || self.intermediate.shape() != (n, n)
            || vecs.iter().any(|v| v.len() != n)
        {
            return Err(Error::InvalidInput(format!(
                "use table components do not all have {n} industries"
            )));
        }
        Ok(())
    }

    /// Shape, sign and balance checks.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        let n = self.n();
        let all = self
            .intermediate
            .iter()
            .chain(&self.labor_comp)
            .chain(&self.capital_comp)
            .chain(&self.household_final)
            .chain(&self.government_final)
            .chain(&self.investment_final);
        if let Some(v) = all.into_iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "use table entry {v} is negative or not finite"
            )));
        }
        for i in 0..n {
            let g = self.gross_output[i];
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "industry '{}' has gross output {g}",
                    self.labels[i]
                )));
            }
            let gap = (g - self.total_uses(i)).abs() / g;
            if gap > BALANCE_TOL {
                return Err(Error::InvalidInput(format!(
                    "industry '{}' uses differ from gross output by {:.3e} (relative); balance the table first",
                    self.labels[i], gap
                )));
            }
        }
        Ok(())
    }

    /// Spreads any slack above the tolerance across the industry's final
    /// demand cells in proportion to their size.
    pub fn balance(&mut self) -> Result<Vec<BalanceAdjustment>> {
        self.check_shapes()?;
        let mut report = Vec::new();
        for i in 0..self.n() {
            let g = self.gross_output[i];
            let slack = g - self.total_uses(i);
            if g <= 0.0 || (slack / g).abs() <= BALANCE_TOL {
                continue;
            }
            let fd = self.household_final[i] + self.government_final[i] + self.investment_final[i];
            if fd <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "industry '{}' cannot be balanced: no final demand to absorb slack {slack}",
                    self.labels[i]
                )));
            }
            let scale = (fd + slack) / fd;
            if scale < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "industry '{}' intermediate uses exceed gross output",
                    self.labels[i]
                )));
            }
            self.household_final[i] *= scale;
            self.government_final[i] *= scale;
            self.investment_final[i] *= scale;
            report.push(BalanceAdjustment {
                industry: self.labels[i].clone(),
                slack,
                relative: slack / g,
            });
        }
        for a in &report {
            info!(
                "balanced '{}': slack {:.4e} ({:.3e} relative)",
                a.industry, a.slack, a.relative
            );
        }
        Ok(report)
    }

    /// Sums industries into the mapping's targets.
    pub fn aggregate(&self, mapping: &IndustryMapping) -> Result<UseTable> {
        let idx = mapping.indices(&self.codes)?;
        let m = mapping.n_targets();
        let sum = |v: &[f64]| {
            let mut out = vec![0.0; m];
            for (s, &t) in idx.iter().enumerate() {
                out[t] += v[s];
            }
            out
        };
        Ok(UseTable {
            codes: mapping.target_codes(),
            labels: mapping.target_labels.clone(),
            intermediate: mapping.aggregate_matrix(&self.intermediate, &idx),
            labor_comp: sum(&self.labor_comp),
            capital_comp: sum(&self.capital_comp),
            household_final: sum(&self.household_final),
            government_final: sum(&self.government_final),
            investment_final: sum(&self.investment_final),
            gross_output: sum(&self.gross_output),
        })
    }
}

/// Investment flows `flows[(i, j)]`: value of good `i` bought as investment
/// by industry `j`, by year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvestmentNetwork {
    pub flows: BTreeMap<i32, DMatrix<f64>>,
}

impl InvestmentNetwork {
    pub fn single(year: i32, flows: DMatrix<f64>) -> Self {
        Self {
            flows: BTreeMap::from([(year, flows)]),
        }
    }
}

/// Depreciation rates by year, `NaN` where unobserved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Depreciation {
    pub rates: BTreeMap<i32, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLevels {
    pub industry: Vec<f64>,
    pub household: f64,
    pub government: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub beta_disc: f64,
    pub frisch: f64,
    pub maintenance_share: f64,
    pub base_mil_share: f64,
    pub weapon_labels: Option<Vec<String>>,
    pub energy_labels: Option<Vec<String>>,
    pub s_p: Option<f64>,
    pub s_e: Option<f64>,
    /// Year of the investment network used for `iota`; defaults to the latest.
    pub target_year: Option<i32>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            beta_disc: 0.98,
            frisch: 0.4,
            maintenance_share: 0.125,
            base_mil_share: 0.033,
            weapon_labels: None,
            energy_labels: None,
            s_p: None,
            s_e: None,
            target_year: None,
        }
    }
}

impl CalibrationConfig {
    pub const KEYS: [&'static str; 9] = [
        "beta",
        "frisch",
        "maintenance_share",
        "base_mil_share",
        "weapon_set",
        "energy_set",
        "s_p",
        "s_e",
        "target_year",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !Self::KEYS.contains(k)) {
            return Err(kv.error_at(k, "unknown calibration key"));
        }
        let d = Self::default();
        Ok(Self {
            beta_disc: kv.parsed("beta")?.unwrap_or(d.beta_disc),
            frisch: kv.parsed("frisch")?.unwrap_or(d.frisch),
            maintenance_share: kv
                .parsed("maintenance_share")?
                .unwrap_or(d.maintenance_share),
            base_mil_share: kv.parsed("base_mil_share")?.unwrap_or(d.base_mil_share),
            weapon_labels: label_list(kv, "weapon_set"),
            energy_labels: label_list(kv, "energy_set"),
            s_p: kv.parsed("s_p")?,
            s_e: kv.parsed("s_e")?,
            target_year: kv.parsed("target_year")?,
        })
    }

    fn check(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.beta_disc) {
            return Err(Error::InvalidInput(format!(
                "beta = {} outside (0, 1)",
                self.beta_disc
            )));
        }
        if !(self.frisch > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frisch = {} must be positive",
                self.frisch
            )));
        }
        if !(0.0..1.0).contains(&self.maintenance_share) {
            return Err(Error::InvalidInput(format!(
                "maintenance share {} outside [0, 1)",
                self.maintenance_share
            )));
        }
        if !in_unit(self.base_mil_share) {
            return Err(Error::InvalidInput(format!(
                "base military share {} outside (0, 1)",
                self.base_mil_share
            )));
        }
        for (name, v) in [("s_p", self.s_p), ("s_e", self.s_e)] {
            if let Some(v) = v {
                if !in_unit(v) {
                    return Err(Error::InvalidInput(format!("{name} = {v} outside (0, 1)")));
                }
            }
        }
        Ok(())
    }
}

/// Industry labels separated by `;` (labels may contain commas).
fn label_list(kv: &KeyValues, key: &str) -> Option<Vec<String>> {
    kv.get(key).map(|v| {
        v.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    })
}

/// Complete parameter set of the network model. Matrices in the `(j, i)`
/// orientation (`omega`, `chi`) hold the share of input `j` in user `i`'s
/// bundle; `delta` and `iota` hold shares of producer `i`'s sales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub n: usize,
    pub labels: Vec<String>,
    #[serde(with = "crate::matrix_serde")]
    pub delta: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub iota: DMatrix<f64>,
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub omega: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub chi: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta_dep: Vec<f64>,
    pub beta_disc: f64,
    pub frisch: f64,
    pub beta_cons: Vec<f64>,
    pub eps_ind: Vec<f64>,
    pub eps_hh: f64,
    pub eps_govt: f64,
    pub weapon_set: Vec<usize>,
    pub energy_set: Vec<usize>,
    pub base_mil_share: f64,
    pub s_p: f64,
    pub s_e: f64,
    /// Base-year gross output (sales side), the Laspeyres weights.
    pub gross_output: Vec<f64>,
    /// Base-year government purchases by industry.
    pub government_final: Vec<f64>,
}

impl Calibration {
    /// Checks every parameter restriction to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.n;
        let bad = |what: String| Err(Error::Invariant(what));
        let vecs: [(&str, &Vec<f64>); 11] = [
            ("phi", &self.phi),
            ("gamma", &self.gamma),
            ("lambda", &self.lambda),
            ("alpha", &self.alpha),
            ("theta", &self.theta),
            ("delta_dep", &self.delta_dep),
            ("beta_cons", &self.beta_cons),
            ("eps_ind", &self.eps_ind),
            ("gross_output", &self.gross_output),
            ("government_final", &self.government_final),
            ("labels", &vec![0.0; self.labels.len()]),
        ];
        for (name, v) in vecs {
            if v.len() != n {
                return bad(format!("{name} has {} entries, expected {n}", v.len()));
            }
        }
        for (name, m) in [
            ("delta", &self.delta),
            ("iota", &self.iota),
            ("omega", &self.omega),
            ("chi", &self.chi),
        ] {
            if m.shape() != (n, n) {
                return bad(format!("{name} is {:?}, expected {n}x{n}", m.shape()));
            }
            if m.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("{name} has negative or non-finite entries"));
            }
        }
        for i in 0..n {
            let l = &self.labels[i];
            let so = self.omega.column(i).sum();
            if (so - 1.0).abs() > tol {
                return bad(format!("omega column of '{l}' sums to {so}"));
            }
            let sc = self.chi.column(i).sum();
            if (sc - 1.0).abs() > tol {
                return bad(format!("chi column of '{l}' sums to {sc}"));
            }
            let ex = self.delta.row(i).sum() + self.iota.row(i).sum() + self.phi[i] + self.gamma[i];
            if (ex - 1.0).abs() > tol {
                return bad(format!("sales shares of '{l}' sum to {ex}"));
            }
            if !(self.alpha[i] > 0.0 && self.alpha[i] < 1.0) {
                return bad(format!("alpha of '{l}' is {}", self.alpha[i]));
            }
            if !(self.theta[i] > 0.0 && self.theta[i] <= 1.0) {
                return bad(format!("theta of '{l}' is {}", self.theta[i]));
            }
            if !(self.delta_dep[i] > 0.0 && self.delta_dep[i] <= 1.0) {
                return bad(format!("depreciation of '{l}' is {}", self.delta_dep[i]));
            }
            if [
                self.phi[i],
                self.gamma[i],
                self.lambda[i],
                self.beta_cons[i],
                self.eps_ind[i],
            ]
            .iter()
            .any(|v| !(*v >= 0.0))
            {
                return bad(format!("negative share for '{l}'"));
            }
        }
        for (name, v) in [("beta_cons", &self.beta_cons), ("lambda", &self.lambda)] {
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > tol {
                return bad(format!("{name} sums to {s}"));
            }
        }
        let eps = self.eps_ind.iter().sum::<f64>() + self.eps_hh + self.eps_govt;
        if (eps - 1.0).abs() > tol || self.eps_hh < 0.0 || self.eps_govt < 0.0 {
            return bad(format!("emission shares sum to {eps}"));
        }
        if !(self.beta_disc > 0.0 && self.beta_disc < 1.0) || !(self.frisch > 0.0) {
            return bad("discount factor or Frisch elasticity out of range".into());
        }
        if self
            .weapon_set
            .iter()
            .chain(&self.energy_set)
            .any(|&i| i >= n)
        {
            return bad("industry set index out of range".into());
        }
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Calibration = serde_json::from_str(&text)?;
        c.validate(1e-8)?;
        Ok(c)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// `A = I - H^{-1}` and intermediate flows `A_ij * x_j` with gross output
/// `x = H f`.
pub fn invert_total_requirements(h: &DMatrix<f64>, final_demand: &[f64]) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n || final_demand.len() != n {
        return Err(Error::InvalidInput(
            "total requirements matrix and final demand disagree in size".into(),
        ));
    }
    let lu = h.clone().lu();
    let hinv = lu
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("total requirements matrix is singular".into()))?;
    let mut a = DMatrix::<f64>::identity(n, n) - hinv;
    for v in a.iter_mut() {
        if *v < 0.0 {
            if *v > -1e-8 {
                *v = 0.0;
            } else {
                return Err(Error::InvalidInput(format!(
                    "implied direct requirement {v:.3e} is negative; inconsistent table"
                )));
            }
        }
    }
    let x = h * DVector::from_column_slice(final_demand);
    Ok(DMatrix::from_fn(n, n, |i, j| a[(i, j)] * x[j]))
}

/// Moves `share` of each industry's investment onto its own output.
///
/// `chi` columns are rescaled by `1 - share` and `share` is added on the
/// diagonal. `iota` (sales shares of investment, producer by investor) is
/// changed the same way in values, so each investor's total spending is
/// unchanged; row sums of `iota` generally change. For a positive share the
/// adjusted `chi` must be non-singular; a zero share leaves the inputs as is.
pub fn maintenance_adjustment(
    chi: &DMatrix<f64>,
    iota: &DMatrix<f64>,
    gross_output: &[f64],
    share: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = chi.nrows();
    if chi.shape() != (n, n) || iota.shape() != (n, n) || gross_output.len() != n {
        return Err(Error::InvalidInput(
            "maintenance adjustment inputs disagree in size".into(),
        ));
    }
    if !(0.0..1.0).contains(&share) {
        return Err(Error::InvalidInput(format!(
            "maintenance share {share} outside [0, 1)"
        )));
    }
    for j in 0..n {
        let s = chi.column(j).sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::Invariant(format!("chi column {j} sums to {s}")));
        }
    }
    let mut chi_new = chi * (1.0 - share);
    let mut iota_new = iota * (1.0 - share);
    for j in 0..n {
        chi_new[(j, j)] += share;
        let spend: f64 = (0..n).map(|i| iota[(i, j)] * gross_output[i]).sum();
        iota_new[(j, j)] += share * spend / gross_output[j];
    }
    if share == 0.0 {
        return Ok((chi_new, iota_new));
    }
    let sv = chi_new.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 1e-12 * hi.max(1.0)) {
        return Err(Error::Singular(format!(
            "investment network is singular after maintenance adjustment (smallest singular value {lo:.3e})"
        )));
    }
    Ok((chi_new, iota_new))
}

fn column_normalize(m: &DMatrix<f64>) -> Vec<Option<Vec<f64>>> {
    (0..m.ncols())
        .map(|j| {
            let s = m.column(j).sum();
            (s > 0.0).then(|| m.column(j).iter().map(|v| v / s).collect())
        })
        .collect()
}

fn resolve_set(
    labels: &[String],
    wanted: Option<&Vec<String>>,
    defaults: &[&str],
    what: &str,
) -> Result<Vec<usize>> {
    let matches = |label: &str, name: &str| {
        label == name || label.to_lowercase().contains(&name.to_lowercase())
    };
    match wanted {
        Some(names) => names
            .iter()
            .map(|name| {
                labels
                    .iter()
                    .position(|l| l == name)
                    .or_else(|| labels.iter().position(|l| matches(l, name)))
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("{what} industry '{name}' not in the table"))
                    })
            })
            .collect(),
        None => {
            let set: Vec<usize> = defaults
                .iter()
                .filter_map(|name| labels.iter().position(|l| matches(l, name)))
                .collect();
            if set.len() < defaults.len() {
                warn!(
                    "only {} of the default {what} industries found in the table",
                    set.len()
                );
            }
            Ok(set)
        }
    }
}

/// Builds and validates the full parameter set.
pub fn build_calibration(
    table: &UseTable,
    investment: &InvestmentNetwork,
    depreciation: &Depreciation,
    emissions: &EmissionLevels,
    config: &CalibrationConfig,
) -> Result<Calibration> {
    config.check()?;
    table.validate()?;
    let n = table.n();
    let label = |i: usize| table.labels[i].as_str();

    // cost side
    let mut alpha = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut omega = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (l, k) = (table.labor_comp[i], table.capital_comp[i]);
        if !(l > 0.0 && k > 0.0) {
            return Err(Error::Invariant(format!(
                "'{}' needs positive labor and capital compensation for a labor share in (0, 1)",
                label(i)
            )));
        }
        alpha[i] = l / (l + k);
        theta[i] = (l + k) / table.gross_output[i];
        if theta[i] > 1.0 + 1e-9 {
            return Err(Error::Invariant(format!(
                "value added of '{}' exceeds gross output",
                label(i)
            )));
        }
        theta[i] = theta[i].min(1.0);
        let x: f64 = table.intermediate.column(i).sum();
        if x > 0.0 {
            for j in 0..n {
                omega[(j, i)] = table.intermediate[(j, i)] / x;
            }
        } else {
            omega[(i, i)] = 1.0;
        }
    }
    let total_labor: f64 = table.labor_comp.iter().sum();
    let lambda: Vec<f64> = table.labor_comp.iter().map(|l| l / total_labor).collect();
    let total_hh: f64 = table.household_final.iter().sum();
    if !(total_hh > 0.0) {
        return Err(Error::Invariant("household final demand is zero".into()));
    }
    let beta_cons: Vec<f64> = table.household_final.iter().map(|v| v / total_hh).collect();

    // investment network: shares by year, averaged
    if investment.flows.is_empty() {
        return Err(Error::InvalidInput("no investment network supplied".into()));
    }
    let mut sums = DMatrix::<f64>::zeros(n, n);
    let mut counts = vec![0usize; n];
    for (year, flows) in &investment.flows {
        if flows.shape() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "investment network {year} is not {n}x{n}"
            )));
        }
        if flows.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "investment network {year} has negative entries"
            )));
        }
        for (j, col) in column_normalize(flows).into_iter().enumerate() {
            if let Some(col) = col {
                counts[j] += 1;
                for (i, v) in col.into_iter().enumerate() {
                    sums[(i, j)] += v;
                }
            }
        }
    }
    let mut chi = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        if counts[j] == 0 {
            return Err(Error::Invariant(format!(
                "'{}' never invests in any year",
                label(j)
            )));
        }
        for i in 0..n {
            chi[(i, j)] = sums[(i, j)] / counts[j] as f64;
        }
    }
    let target = config
        .target_year
        .unwrap_or_else(|| *investment.flows.keys().next_back().expect("non-empty"));
    let flows = investment.flows.get(&target).ok_or_else(|| {
        Error::InvalidInput(format!("no investment network for target year {target}"))
    })?;
    let g0 = &table.gross_output;
    let iota0 = DMatrix::from_fn(n, n, |i, j| flows[(i, j)] / g0[i]);
    let (chi, iota_adj) = maintenance_adjustment(&chi, &iota0, g0, config.maintenance_share)?;
    let inv_flows = DMatrix::from_fn(n, n, |i, j| iota_adj[(i, j)] * g0[i]);

    // sales side, with gross output restated so shares exhaust exactly
    let mut gross = vec![0.0; n];
    for i in 0..n {
        gross[i] = table.intermediate.row(i).sum()
            + table.household_final[i]
            + table.government_final[i]
            + inv_flows.row(i).sum();
        let inv_gap = inv_flows.row(i).sum() - table.investment_final[i];
        if inv_gap.abs() > BALANCE_TOL * g0[i] {
            info!(
                "'{}': investment network deliveries differ from the use table by {inv_gap:.4e}; gross output restated from {:.6e} to {:.6e}",
                label(i),
                g0[i],
                gross[i]
            );
        }
    }
    let delta = DMatrix::from_fn(n, n, |i, j| table.intermediate[(i, j)] / gross[i]);
    let iota = DMatrix::from_fn(n, n, |i, j| inv_flows[(i, j)] / gross[i]);
    let phi: Vec<f64> = (0..n)
        .map(|i| table.household_final[i] / gross[i])
        .collect();
    let gamma: Vec<f64> = (0..n)
        .map(|i| table.government_final[i] / gross[i])
        .collect();

    // depreciation
    let mut delta_dep = vec![0.0; n];
    for (i, d) in delta_dep.iter_mut().enumerate() {
        let obs: Vec<f64> = depreciation
            .rates
            .values()
            .filter_map(|r| r.get(i).copied())
            .filter(|v| v.is_finite())
            .collect();
        if obs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no depreciation rate for '{}'",
                label(i)
            )));
        }
        *d = obs.iter().sum::<f64>() / obs.len() as f64;
    }

    // emissions
    if emissions.industry.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} industry emission levels for {n} industries",
            emissions.industry.len()
        )));
    }
    let levels = emissions
        .industry
        .iter()
        .chain([&emissions.household, &emissions.government]);
    if levels.clone().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput(
            "emission levels must be non-negative".into(),
        ));
    }
    let total_em: f64 = levels.sum();
    if !(total_em > 0.0) {
        return Err(Error::InvalidInput("total emissions are zero".into()));
    }

    let weapon_set = resolve_set(
        &table.labels,
        config.weapon_labels.as_ref(),
        &DEFAULT_WEAPON_LABELS,
        "weapon",
    )?;
    let energy_set = resolve_set(
        &table.labels,
        config.energy_labels.as_ref(),
        &DEFAULT_ENERGY_LABELS,
        "energy",
    )?;
    let gdp: f64 = (0..n)
        .map(|i| table.household_final[i] + table.government_final[i] + inv_flows.row(i).sum())
        .sum();
    let gov_share =
        |set: &[usize]| set.iter().map(|&i| table.government_final[i]).sum::<f64>() / gdp;
    let s_p = config.s_p.unwrap_or_else(|| gov_share(&weapon_set));
    let s_e = config.s_e.unwrap_or_else(|| gov_share(&energy_set));

    let calib = Calibration {
        n,
        labels: table.labels.clone(),
        delta,
        iota,
        phi,
        gamma,
        lambda,
        omega,
        chi,
        alpha,
        theta,
        delta_dep,
        beta_disc: config.beta_disc,
        frisch: config.frisch,
        beta_cons,
        eps_ind: emissions.industry.iter().map(|v| v / total_em).collect(),
        eps_hh: emissions.household / total_em,
        eps_govt: emissions.government / total_em,
        weapon_set,
        energy_set,
        base_mil_share: config.base_mil_share,
        s_p,
        s_e,
        gross_output: gross,
        government_final: table.government_final.clone(),
    };
    calib.validate(INVARIANT_TOL)?;
    Ok(calib)
}
