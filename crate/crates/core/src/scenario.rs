//! Policy scenarios, government purchase paths, and emission and damage
//! reports.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::model::GovernmentPath;
use crate::solve::{
    industry_report, solve_steady_with, Aggregates, IndustryChange, SolverOptions, SteadySolution,
};

pub const TEMPORARY_RHO: f64 = 0.86;
/// Peak military spending share targeted by the Korean War preset, in
/// percent of GDP.
pub const KOREAN_WAR_PEAK_PCT: f64 = 13.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Baseline,
    Personnel,
    Material,
    Custom,
}

impl Preset {
    /// `(s_P, s_E)` pinned by the preset.
    pub fn shares(self) -> Option<(f64, f64)> {
        match self {
            Preset::Baseline => Some((0.3, 0.05)),
            Preset::Personnel => Some((0.2, 0.02)),
            Preset::Material => Some((0.4, 0.1)),
            Preset::Custom => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Personnel => "personnel",
            Preset::Material => "material",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(Preset::Baseline),
            "personnel" => Ok(Preset::Personnel),
            "material" => Ok(Preset::Material),
            "custom" => Ok(Preset::Custom),
            _ => Err(format!("unknown preset '{s}'")),
        }
    }
}

/// Extra military spending in percentage points of GDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockAmount {
    Pp(f64),
    /// Doubles the base military share.
    Doubling,
    /// Raises the military share to its Korean War peak.
    KoreanWar,
}

impl ShockAmount {
    pub fn to_pp(self, base_mil_share: f64) -> f64 {
        match self {
            ShockAmount::Pp(e) => e,
            ShockAmount::Doubling => 100.0 * base_mil_share,
            ShockAmount::KoreanWar => KOREAN_WAR_PEAK_PCT - 100.0 * base_mil_share,
        }
    }
}

impl FromStr for ShockAmount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "doubling" => Ok(ShockAmount::Doubling),
            "korean_war" => Ok(ShockAmount::KoreanWar),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ShockAmount::Pp)
                .ok_or_else(|| format!("'{s}' is not a number, 'doubling' or 'korean_war'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub preset: Preset,
    pub shock: ShockAmount,
    pub s_p: f64,
    pub s_e: f64,
    pub rho: f64,
    pub t0: usize,
    /// Overrides of the calibrated base shares.
    pub base_procurement_share: Option<f64>,
    pub base_energy_share: Option<f64>,
    pub base_mil_share: Option<f64>,
}

impl ScenarioSpec {
    pub fn preset(preset: Preset, e_pp: f64, rho: f64) -> Self {
        let (s_p, s_e) = preset.shares().unwrap_or((0.0, 0.0));
        Self {
            preset,
            shock: ShockAmount::Pp(e_pp),
            s_p,
            s_e,
            rho,
            t0: 0,
            base_procurement_share: None,
            base_energy_share: None,
            base_mil_share: None,
        }
    }

    pub const KEYS: [&'static str; 12] = [
        "E_pp",
        "preset",
        "s_P",
        "s_E",
        "rho",
        "t0",
        "S_P",
        "S_E",
        "base_mil_share",
        "scc",
        "base_emissions_t",
        "base_gdp",
    ];

    /// Reads scenario keys; damage keys are accepted and left to
    /// [`DamageSpec::from_key_values`].
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !Self::KEYS.contains(k)) {
            return Err(kv.error_at(k, "unknown scenario key"));
        }
        let preset = match kv.get("preset") {
            Some(p) => p.parse::<Preset>().map_err(|m| kv.error_at("preset", m))?,
            None => Preset::Baseline,
        };
        let shock = match kv.get("E_pp") {
            Some(e) => e
                .parse::<ShockAmount>()
                .map_err(|m| kv.error_at("E_pp", m))?,
            None => return Err(kv.error_at("E_pp", "missing required key E_pp")),
        };
        let (s_p, s_e) = match (
            preset.shares(),
            kv.parsed::<f64>("s_P")?,
            kv.parsed::<f64>("s_E")?,
        ) {
            (Some(pinned), None, None) => pinned,
            (Some(_), _, _) => {
                return Err(kv.error_at(
                    "s_P",
                    "s_P and s_E are fixed by the preset; use preset = custom",
                ))
            }
            (None, Some(p), Some(e)) => (p, e),
            (None, _, _) => {
                return Err(kv.error_at("preset", "custom preset needs both s_P and s_E"))
            }
        };
        let rho = match kv.get("rho") {
            None | Some("temporary") => TEMPORARY_RHO,
            Some("permanent") => 1.0,
            Some(_) => kv.parsed::<f64>("rho")?.expect("present"),
        };
        let spec = Self {
            preset,
            shock,
            s_p,
            s_e,
            rho,
            t0: kv.parsed("t0")?.unwrap_or(0),
            base_procurement_share: kv.parsed("S_P")?,
            base_energy_share: kv.parsed("S_E")?,
            base_mil_share: kv.parsed("base_mil_share")?,
        };
        spec.check_shares()
            .map_err(|e| kv.error_at("s_P", e.to_string()))?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    fn check_shares(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.s_p) || !unit(self.s_e) || self.s_p + self.s_e > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "spending shares s_P = {}, s_E = {} must be in [0, 1] with sum at most 1",
                self.s_p, self.s_e
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "persistence {} outside (0, 1]",
                self.rho
            )));
        }
        Ok(())
    }

    /// Base shares and shock size after applying overrides.
    pub fn resolve(&self, calib: &Calibration) -> Result<ResolvedScenario> {
        self.check_shares()?;
        let base = self.base_mil_share.unwrap_or(calib.base_mil_share);
        let e_pp = self.shock.to_pp(base);
        if !(e_pp > -100.0 * base) {
            return Err(Error::InvalidInput(format!(
                "a shock of {e_pp} p.p. would make the military share non-positive"
            )));
        }
        let big_s_p = self.base_procurement_share.unwrap_or(calib.s_p);
        let big_s_e = self.base_energy_share.unwrap_or(calib.s_e);
        Ok(ResolvedScenario {
            e_pp,
            pm: procurement_multiplier(big_s_p, self.s_p, e_pp)?,
            em: energy_multiplier(big_s_e, self.s_e, e_pp)?,
            big_s_p,
            big_s_e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub e_pp: f64,
    pub pm: f64,
    pub em: f64,
    pub big_s_p: f64,
    pub big_s_e: f64,
}

fn multiplier(base: f64, share: f64, e_pp: f64, what: &str) -> Result<f64> {
    if !(base > 0.0 && base.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "base {what} share of GDP is {base}; the shocked industries need positive government purchases"
        )));
    }
    Ok((base + share * e_pp / 100.0) / base)
}

/// `(S_P + s_P E) / S_P` with `E` given in percentage points.
pub fn procurement_multiplier(big_s_p: f64, s_p: f64, e_pp: f64) -> Result<f64> {
    multiplier(big_s_p, s_p, e_pp, "procurement")
}

/// `(S_E + s_E E) / S_E` with `E` given in percentage points.
pub fn energy_multiplier(big_s_e: f64, s_e: f64, e_pp: f64) -> Result<f64> {
    multiplier(big_s_e, s_e, e_pp, "energy")
}

/// Government purchase path of a scenario.
pub fn government_path(spec: &ScenarioSpec, calib: &Calibration) -> Result<GovernmentPath> {
    let r = spec.resolve(calib)?;
    if (r.pm - 1.0).abs() > 0.0 && calib.weapon_set.is_empty() {
        return Err(Error::InvalidInput(
            "procurement shock with an empty weapon industry set".into(),
        ));
    }
    if (r.em - 1.0).abs() > 0.0 && calib.energy_set.is_empty() {
        return Err(Error::InvalidInput(
            "energy shock with an empty energy industry set".into(),
        ));
    }
    let mut impact = vec![1.0; calib.n];
    for &i in &calib.weapon_set {
        impact[i] = r.pm;
    }
    for &i in &calib.energy_set {
        impact[i] = r.em;
    }
    let path = GovernmentPath {
        impact,
        rho: spec.rho,
        start: spec.t0,
    };
    path.check(calib.n)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    /// currency per tonne CO2e
    pub scc: f64,
    /// tonnes CO2e per year
    pub base_emissions: f64,
    pub base_gdp: f64,
}

impl Default for DamageSpec {
    fn default() -> Self {
        Self {
            scc: 190.0,
            base_emissions: 6.09e9,
            base_gdp: 1.948e13,
        }
    }
}

impl DamageSpec {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            scc: kv.parsed("scc")?.unwrap_or(d.scc),
            base_emissions: kv.parsed("base_emissions_t")?.unwrap_or(d.base_emissions),
            base_gdp: kv.parsed("base_gdp")?.unwrap_or(d.base_gdp),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("scc", self.scc),
            ("base_emissions_t", self.base_emissions),
            ("base_gdp", self.base_gdp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Damages {
    pub delta_emissions_pct: f64,
    pub damages_per_year: f64,
    pub share_of_gdp_pct: f64,
    pub basis: String,
}

/// Annual damages of a permanent change in emissions, valued at the social
/// cost of carbon.
pub fn scc_damages(delta_emissions_pct: f64, spec: &DamageSpec) -> Result<Damages> {
    spec.check()?;
    let damages = spec.base_emissions * delta_emissions_pct / 100.0 * spec.scc;
    Ok(Damages {
        delta_emissions_pct,
        damages_per_year: damages,
        share_of_gdp_pct: 100.0 * damages / spec.base_gdp,
        basis: "steady-state annual flow; transition path not integrated".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionsReport {
    pub scenario: ScenarioSpec,
    pub resolved: ResolvedScenario,
    pub aggregates: Aggregates,
    /// Percent changes.
    pub emissions_pct: f64,
    pub real_gdp_pct: f64,
    pub intensity_pct: f64,
    /// `ln E - ln Y - ln intensity`
    pub decomposition_residual: f64,
    /// Share of the log emissions change accounted for by intensity.
    pub intensity_share: Option<f64>,
    pub industries: Vec<IndustryChange>,
    pub damages: Option<Damages>,
}

pub fn emissions_report(
    solution: &SteadySolution,
    scenario: &ScenarioSpec,
    calib: &Calibration,
    damages: Option<&DamageSpec>,
) -> Result<EmissionsReport> {
    let a = solution.aggregates;
    let emissions_pct = 100.0 * (a.emissions - 1.0);
    let le = a.emissions.ln();
    Ok(EmissionsReport {
        scenario: scenario.clone(),
        resolved: scenario.resolve(calib)?,
        aggregates: a,
        emissions_pct,
        real_gdp_pct: 100.0 * (a.real_gdp - 1.0),
        intensity_pct: 100.0 * (a.intensity - 1.0),
        decomposition_residual: le - a.real_gdp.ln() - a.intensity.ln(),
        intensity_share: (le.abs() > 1e-14).then(|| a.intensity.ln() / le),
        industries: industry_report(&solution.state, calib),
        damages: damages.map(|d| scc_damages(emissions_pct, d)).transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub preset: Preset,
    pub e_pp: f64,
    pub emissions_pct: f64,
    pub real_gdp_pct: f64,
    pub intensity_pct: f64,
}

/// Permanent-shock steady states over a grid of shock sizes for each preset.
/// Results are in preset-then-grid order regardless of scheduling.
pub fn sweep(
    calib: &Calibration,
    presets: &[Preset],
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(Preset, f64)> = presets
        .iter()
        .flat_map(|&p| grid.iter().map(move |&e| (p, e)))
        .collect();
    jobs.into_par_iter()
        .map(|(preset, e_pp)| {
            let spec = ScenarioSpec::preset(preset, e_pp, 1.0);
            let g = government_path(&spec, calib)?;
            let sol = solve_steady_with(calib, &g.terminal(), opts)?;
            let a = sol.aggregates;
            Ok(SweepPoint {
                preset,
                e_pp,
                emissions_pct: 100.0 * (a.emissions - 1.0),
                real_gdp_pct: 100.0 * (a.real_gdp - 1.0),
                intensity_pct: 100.0 * (a.intensity - 1.0),
            })
        })
        .collect()
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad grid component '{p}'"))
        })
        .collect::<std::result::Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid '{s}' is not start:stop:step"));
    };
    if !(step > 0.0) || stop < start {
        return Err(format!(
            "grid '{s}' needs a positive step and stop >= start"
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}
