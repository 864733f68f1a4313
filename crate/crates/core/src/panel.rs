//! Country-year panel ingestion and the military-spending transformations.
//!
//! Shares are stored as fractions of GDP throughout; conversion to
//! percentage points happens only where shocks are produced.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::linalg::ols;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PanelObservation {
    pub country: String,
    pub year: i32,
    pub mil_share: Option<f64>,
    pub nominal_gdp: Option<f64>,
    pub real_gdp: Option<f64>,
    pub deflator: Option<f64>,
    pub emissions: Option<f64>,
    pub energy_use: Option<f64>,
    pub gdp_pc: Option<f64>,
    pub exports: Option<f64>,
    pub imports: Option<f64>,
    pub democracy: Option<f64>,
    pub steel: Option<f64>,
    pub patents_total: Option<f64>,
    pub patents_green: Option<f64>,
}

/// Variables that can be pulled out of an observation, including the two
/// derived intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelVariable {
    MilShare,
    NominalGdp,
    RealGdp,
    Deflator,
    Emissions,
    EnergyUse,
    GdpPc,
    Exports,
    Imports,
    Democracy,
    Steel,
    PatentsTotal,
    PatentsGreen,
    EmissionIntensity,
    EnergyIntensity,
}

impl PanelVariable {
    pub const ALL: [PanelVariable; 15] = [
        PanelVariable::MilShare,
        PanelVariable::NominalGdp,
        PanelVariable::RealGdp,
        PanelVariable::Deflator,
        PanelVariable::Emissions,
        PanelVariable::EnergyUse,
        PanelVariable::GdpPc,
        PanelVariable::Exports,
        PanelVariable::Imports,
        PanelVariable::Democracy,
        PanelVariable::Steel,
        PanelVariable::PatentsTotal,
        PanelVariable::PatentsGreen,
        PanelVariable::EmissionIntensity,
        PanelVariable::EnergyIntensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PanelVariable::MilShare => "mil_share",
            PanelVariable::NominalGdp => "nominal_gdp",
            PanelVariable::RealGdp => "real_gdp",
            PanelVariable::Deflator => "deflator",
            PanelVariable::Emissions => "emissions",
            PanelVariable::EnergyUse => "energy_use",
            PanelVariable::GdpPc => "gdp_pc",
            PanelVariable::Exports => "exports",
            PanelVariable::Imports => "imports",
            PanelVariable::Democracy => "democracy",
            PanelVariable::Steel => "steel",
            PanelVariable::PatentsTotal => "patents_total",
            PanelVariable::PatentsGreen => "patents_green",
            PanelVariable::EmissionIntensity => "emission_intensity",
            PanelVariable::EnergyIntensity => "energy_intensity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Stored columns only; the intensities are derived.
    pub fn is_stored(self) -> bool {
        !matches!(
            self,
            PanelVariable::EmissionIntensity | PanelVariable::EnergyIntensity
        )
    }

    pub fn value(self, obs: &PanelObservation) -> Option<f64> {
        match self {
            PanelVariable::MilShare => obs.mil_share,
            PanelVariable::NominalGdp => obs.nominal_gdp,
            PanelVariable::RealGdp => obs.real_gdp,
            PanelVariable::Deflator => obs.deflator,
            PanelVariable::Emissions => obs.emissions,
            PanelVariable::EnergyUse => obs.energy_use,
            PanelVariable::GdpPc => obs.gdp_pc,
            PanelVariable::Exports => obs.exports,
            PanelVariable::Imports => obs.imports,
            PanelVariable::Democracy => obs.democracy,
            PanelVariable::Steel => obs.steel,
            PanelVariable::PatentsTotal => obs.patents_total,
            PanelVariable::PatentsGreen => obs.patents_green,
            PanelVariable::EmissionIntensity => Some(obs.emissions? / obs.real_gdp?),
            PanelVariable::EnergyIntensity => Some(obs.energy_use? / obs.real_gdp?),
        }
    }

    fn slot(self, obs: &mut PanelObservation) -> Option<&mut Option<f64>> {
        Some(match self {
            PanelVariable::MilShare => &mut obs.mil_share,
            PanelVariable::NominalGdp => &mut obs.nominal_gdp,
            PanelVariable::RealGdp => &mut obs.real_gdp,
            PanelVariable::Deflator => &mut obs.deflator,
            PanelVariable::Emissions => &mut obs.emissions,
            PanelVariable::EnergyUse => &mut obs.energy_use,
            PanelVariable::GdpPc => &mut obs.gdp_pc,
            PanelVariable::Exports => &mut obs.exports,
            PanelVariable::Imports => &mut obs.imports,
            PanelVariable::Democracy => &mut obs.democracy,
            PanelVariable::Steel => &mut obs.steel,
            PanelVariable::PatentsTotal => &mut obs.patents_total,
            PanelVariable::PatentsGreen => &mut obs.patents_green,
            PanelVariable::EmissionIntensity | PanelVariable::EnergyIntensity => return None,
        })
    }
}

/// Maps logical fields onto CSV column headers.
///
/// Fields named explicitly in a schema file are required to be present in
/// the CSV; the remaining fields default to a column of the same name and
/// are read only if such a column exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub country: String,
    pub year: String,
    columns: BTreeMap<PanelVariable, (String, bool)>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        let columns = PanelVariable::ALL
            .into_iter()
            .filter(|v| v.is_stored())
            .map(|v| (v, (v.name().to_string(), false)))
            .collect();
        Self {
            country: "country".into(),
            year: "year".into(),
            columns,
        }
    }
}

impl ColumnSchema {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut schema = Self::default();
        for key in kv.keys() {
            let column = kv.get(key).unwrap_or_default().to_string();
            match key {
                "country" => schema.country = column,
                "year" => schema.year = column,
                other => {
                    let var = PanelVariable::parse(other)
                        .filter(|v| v.is_stored())
                        .ok_or_else(|| {
                            kv.error_at(other, format!("unknown panel field `{other}`"))
                        })?;
                    schema.columns.insert(var, (column, true));
                }
            }
        }
        Ok(schema)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    /// Marks `var` as required (it must appear in the CSV header).
    pub fn require(mut self, var: PanelVariable) -> Self {
        if let Some(entry) = self.columns.get_mut(&var) {
            entry.1 = true;
        }
        self
    }
}

/// Why a row was dropped at load time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    pub row: usize,
    pub country: String,
    pub year: i32,
    pub reason: String,
}

/// A hole inside one country's year coverage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct YearGap {
    pub country: String,
    pub after: i32,
    pub before: i32,
}

/// Validated, immutable country-year panel. Rows are sorted by
/// `(country, year)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelDataset {
    rows: Vec<PanelObservation>,
    countries: Vec<String>,
    years: Vec<i32>,
    /// row range of each country in `rows`
    #[serde(skip)]
    spans: BTreeMap<String, (usize, usize)>,
    pub rejected: Vec<RowDiagnostic>,
    pub gaps: Vec<YearGap>,
}

impl PanelDataset {
    /// Builds a dataset from observations, rejecting duplicate keys.
    /// Observations violating value invariants are dropped and recorded.
    pub fn from_observations(obs: Vec<PanelObservation>) -> Result<Self> {
        let indexed = obs
            .into_iter()
            .enumerate()
            .map(|(i, o)| (i + 1, o))
            .collect();
        Self::build(indexed)
    }

    fn build(mut obs: Vec<(usize, PanelObservation)>) -> Result<Self> {
        obs.sort_by(|a, b| (&a.1.country, a.1.year).cmp(&(&b.1.country, b.1.year)));
        for w in obs.windows(2) {
            if w[0].1.country == w[1].1.country && w[0].1.year == w[1].1.year {
                return Err(Error::DuplicateKey {
                    country: w[0].1.country.clone(),
                    year: w[0].1.year,
                });
            }
        }
        let mut rejected = Vec::new();
        let mut rows = Vec::with_capacity(obs.len());
        for (line, o) in obs {
            match check_invariants(&o) {
                Ok(()) => rows.push(o),
                Err(reason) => rejected.push(RowDiagnostic {
                    row: line,
                    country: o.country.clone(),
                    year: o.year,
                    reason,
                }),
            }
        }
        for d in &rejected {
            log::warn!(
                "rejected row {} ({}, {}): {}",
                d.row,
                d.country,
                d.year,
                d.reason
            );
        }

        let mut spans = BTreeMap::new();
        let mut gaps = Vec::new();
        let mut start = 0;
        for i in 1..=rows.len() {
            if i == rows.len() || rows[i].country != rows[start].country {
                spans.insert(rows[start].country.clone(), (start, i));
                for w in rows[start..i].windows(2) {
                    if w[1].year != w[0].year + 1 {
                        gaps.push(YearGap {
                            country: w[0].country.clone(),
                            after: w[0].year,
                            before: w[1].year,
                        });
                    }
                }
                start = i;
            }
        }
        for g in &gaps {
            log::warn!(
                "{}: no observations between {} and {}",
                g.country,
                g.after,
                g.before
            );
        }
        let countries = spans.keys().cloned().collect();
        let years: BTreeSet<i32> = rows.iter().map(|r| r.year).collect();
        Ok(Self {
            rows,
            countries,
            years: years.into_iter().collect(),
            spans,
            rejected,
            gaps,
        })
    }

    pub fn rows(&self) -> &[PanelObservation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn country_rows(&self, country: &str) -> &[PanelObservation] {
        match self.spans.get(country) {
            Some(&(a, b)) => &self.rows[a..b],
            None => &[],
        }
    }

    pub fn get(&self, country: &str, year: i32) -> Option<&PanelObservation> {
        let rows = self.country_rows(country);
        rows.binary_search_by_key(&year, |o| o.year)
            .ok()
            .map(|i| &rows[i])
    }

    pub fn value(&self, country: &str, year: i32, var: PanelVariable) -> Option<f64> {
        self.get(country, year).and_then(|o| var.value(o))
    }

    /// Non-missing values of one variable for one country.
    pub fn series(&self, country: &str, var: PanelVariable) -> BTreeMap<i32, f64> {
        self.country_rows(country)
            .iter()
            .filter_map(|o| var.value(o).map(|v| (o.year, v)))
            .collect()
    }

    /// Sub-panel containing only the listed countries.
    pub fn restrict(&self, countries: &[String]) -> Result<Self> {
        let keep: BTreeSet<&str> = countries.iter().map(String::as_str).collect();
        let rows = self
            .rows
            .iter()
            .filter(|o| keep.contains(o.country.as_str()))
            .cloned()
            .collect();
        Self::from_observations(rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["country".to_string(), "year".to_string()];
        let stored: Vec<PanelVariable> = PanelVariable::ALL
            .into_iter()
            .filter(|v| v.is_stored())
            .collect();
        header.extend(stored.iter().map(|v| v.name().to_string()));
        w.write_record(&header)?;
        for o in &self.rows {
            let mut rec = vec![o.country.clone(), o.year.to_string()];
            rec.extend(
                stored
                    .iter()
                    .map(|v| v.value(o).map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn check_invariants(o: &PanelObservation) -> std::result::Result<(), String> {
    let bad = |name: &str, v: f64, rule: &str| Err(format!("{name} = {v} violates {rule}"));
    if let Some(m) = o.mil_share {
        if !(0.0..=1.0).contains(&m) {
            return bad("mil_share", m, "0 <= mil_share <= 1");
        }
    }
    if let Some(d) = o.democracy {
        if !(0.0..=1.0).contains(&d) {
            return bad("democracy", d, "0 <= democracy <= 1");
        }
    }
    for (name, v) in [("real_gdp", o.real_gdp), ("deflator", o.deflator)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return bad(name, v, "positivity");
            }
        }
    }
    for (name, v) in [
        ("emissions", o.emissions),
        ("energy_use", o.energy_use),
        ("nominal_gdp", o.nominal_gdp),
    ] {
        if let Some(v) = v {
            if !(v >= 0.0) {
                return bad(name, v, "non-negativity");
            }
        }
    }
    Ok(())
}

/// Reads a panel CSV through `schema`.
pub fn load_panel(path: &Path, schema: &ColumnSchema) -> Result<PanelDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel(file, schema)
}

pub fn read_panel<R: std::io::Read>(reader: R, schema: &ColumnSchema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let country_col =
        find(&schema.country).ok_or_else(|| Error::MissingColumn(schema.country.clone()))?;
    let year_col = find(&schema.year).ok_or_else(|| Error::MissingColumn(schema.year.clone()))?;
    let mut fields = Vec::new();
    for (var, (col, required)) in &schema.columns {
        match find(col) {
            Some(idx) => fields.push((*var, idx, col.clone())),
            None if *required => return Err(Error::MissingColumn(col.clone())),
            None => {}
        }
    }

    let mut obs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2; // header is line 1
        let cell = |idx: usize| rec.get(idx).unwrap_or("");
        let country = cell(country_col).to_string();
        if country.is_empty() {
            return Err(Error::NonNumeric {
                row,
                column: schema.country.clone(),
                value: String::new(),
            });
        }
        let year_raw = cell(year_col);
        let year = year_raw.parse::<i32>().map_err(|_| Error::NonNumeric {
            row,
            column: schema.year.clone(),
            value: year_raw.to_string(),
        })?;
        let mut o = PanelObservation {
            country,
            year,
            ..Default::default()
        };
        for (var, idx, col) in &fields {
            let raw = cell(*idx);
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                continue;
            }
            let v = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row,
                    column: col.clone(),
                    value: raw.to_string(),
                })?;
            if let Some(slot) = var.slot(&mut o) {
                *slot = Some(v);
            }
        }
        obs.push((row, o));
    }
    PanelDataset::build(obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    LevelShare,
    GordonKrenn,
    HallBarroRedlick,
}

/// One country's transformed spending measure, as a fraction of GDP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedSeries {
    pub country: String,
    pub values: BTreeMap<i32, f64>,
    pub kind: SeriesKind,
}

/// Least-squares fit of the series on `{1, t, t^2}`.
pub fn quadratic_trend(series: &BTreeMap<i32, f64>) -> Result<BTreeMap<i32, f64>> {
    if series.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "quadratic trend needs at least 4 points, got {}",
            series.len()
        )));
    }
    // centre and scale the time index for conditioning
    let n = series.len() as f64;
    let mean = series.keys().map(|&t| t as f64).sum::<f64>() / n;
    let half_range = series
        .keys()
        .map(|&t| (t as f64 - mean).abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let x = DMatrix::from_fn(series.len(), 3, |r, c| {
        let t = (*series.keys().nth(r).unwrap() as f64 - mean) / half_range;
        t.powi(c as i32)
    });
    let y: Vec<f64> = series.values().copied().collect();
    let fit = ols(&y, &x)?;
    Ok(series.keys().copied().zip(fit.fitted).collect())
}

/// The plain spending share, restricted to non-missing years.
pub fn share_series(obs: &[PanelObservation]) -> TransformedSeries {
    TransformedSeries {
        country: obs.first().map(|o| o.country.clone()).unwrap_or_default(),
        values: obs
            .iter()
            .filter_map(|o| o.mil_share.map(|m| (o.year, m)))
            .collect(),
        kind: SeriesKind::LevelShare,
    }
}

/// Real military spending `m* = share * nominal GDP / deflator` by year.
fn real_spending(obs: &[PanelObservation]) -> BTreeMap<i32, (f64, f64)> {
    obs.iter()
        .filter_map(|o| {
            let m = o.mil_share? * o.nominal_gdp? / o.deflator?;
            Some((o.year, (m, o.real_gdp?)))
        })
        .collect()
}

/// Real military spending over the quadratic trend of real GDP.
pub fn gordon_krenn(obs: &[PanelObservation]) -> Result<TransformedSeries> {
    let country = obs.first().map(|o| o.country.clone()).unwrap_or_default();
    let real = real_spending(obs);
    let gdp: BTreeMap<i32, f64> = real.iter().map(|(&t, &(_, y))| (t, y)).collect();
    let trend = quadratic_trend(&gdp)?;
    let mut values = BTreeMap::new();
    for (t, (m, _)) in real {
        let ystar = trend[&t];
        if !(ystar > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{country}: non-positive real GDP trend ({ystar:.4e}) in {t}"
            )));
        }
        values.insert(t, m / ystar);
    }
    Ok(TransformedSeries {
        country,
        values,
        kind: SeriesKind::GordonKrenn,
    })
}

/// Change in real military spending over the previous year's real GDP.
/// The first year of the country is dropped.
pub fn hall_barro_redlick(obs: &[PanelObservation]) -> Result<TransformedSeries> {
    let country = obs.first().map(|o| o.country.clone()).unwrap_or_default();
    let real = real_spending(obs);
    if real.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{country}: need two consecutive years for the spending change"
        )));
    }
    let years: Vec<i32> = real.keys().copied().collect();
    if let Some(w) = years.windows(2).find(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidInput(format!(
            "{country}: non-contiguous years {} and {}",
            w[0], w[1]
        )));
    }
    let values = years
        .windows(2)
        .map(|w| {
            let (m1, y1) = real[&w[0]];
            let (m2, _) = real[&w[1]];
            (w[1], (m2 - m1) / y1)
        })
        .collect();
    Ok(TransformedSeries {
        country,
        values,
        kind: SeriesKind::HallBarroRedlick,
    })
}

/// Applies a transformation to every country, in country order.
pub fn transform_panel(panel: &PanelDataset, kind: SeriesKind) -> Result<Vec<TransformedSeries>> {
    panel
        .countries()
        .par_iter()
        .map(|c| {
            let rows = panel.country_rows(c);
            match kind {
                SeriesKind::LevelShare => Ok(share_series(rows)),
                SeriesKind::GordonKrenn => gordon_krenn(rows),
                SeriesKind::HallBarroRedlick => hall_barro_redlick(rows),
            }
        })
        .collect()
}
