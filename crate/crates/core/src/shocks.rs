//! Military-spending shocks as regression forecast errors, estimated
//! country by country.
//!
//! For horizon `h` and lag order `l` the per-country regression is
//! `M[t+h] = a + b0 M[t] + ... + bl M[t-l] + e[t+h]`; the residual is the
//! shock, dated at the realisation year `t+h` and reported in percentage
//! points. Windows that would straddle a missing year are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ols_min_norm;
use crate::panel::{transform_panel, PanelDataset, SeriesKind, TransformedSeries};

/// Extra observations demanded beyond the regression's parameter count.
pub const MIN_EXTRA_OBS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShockSeries {
    pub country: String,
    /// year -> shock in percentage points
    pub shocks: BTreeMap<i32, f64>,
    pub horizon_h: usize,
    pub lag_l: usize,
}

/// Shocks for a set of countries, keyed by country code.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShockSet(pub BTreeMap<String, ShockSeries>);

impl ShockSet {
    pub fn get(&self, country: &str, year: i32) -> Option<f64> {
        self.0.get(country)?.shocks.get(&year).copied()
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn insert(&mut self, s: ShockSeries) {
        self.0.insert(s.country.clone(), s);
    }

    /// Copies one country's shocks onto each of `targets` (the common-shock
    /// design used for spillovers).
    pub fn replicate(source: &ShockSeries, targets: &[String]) -> Self {
        let mut out = ShockSet::default();
        for t in targets {
            out.insert(ShockSeries {
                country: t.clone(),
                ..source.clone()
            });
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["country", "year", "shock_pp"])?;
        for s in self.0.values() {
            for (year, v) in &s.shocks {
                w.write_record([s.country.as_str(), &year.to_string(), &v.to_string()])?;
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let (ci, yi, si) = (col("country")?, col("year")?, col("shock_pp")?);
        let mut out: BTreeMap<String, ShockSeries> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let num = |idx: usize, name: &str| -> Result<f64> {
                let raw = rec.get(idx).unwrap_or("");
                raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row,
                    column: name.into(),
                    value: raw.into(),
                })
            };
            let country = rec.get(ci).unwrap_or("").to_string();
            let year = num(yi, "year")? as i32;
            let shock = num(si, "shock_pp")?;
            let entry = out.entry(country.clone()).or_insert_with(|| ShockSeries {
                country: country.clone(),
                shocks: BTreeMap::new(),
                horizon_h: 0,
                lag_l: 0,
            });
            if entry.shocks.insert(year, shock).is_some() {
                return Err(Error::DuplicateKey { country, year });
            }
        }
        Ok(ShockSet(out))
    }
}

/// Hamilton-regression shocks for one country's series (values as fractions),
/// returned in percentage points.
pub fn hamilton_shocks(series: &TransformedSeries, h: usize, l: usize) -> Result<ShockSeries> {
    if h == 0 {
        return Err(Error::InvalidInput(
            "forecast horizon h must be at least 1".into(),
        ));
    }
    let min_obs = h + l + 1 + MIN_EXTRA_OBS;
    if series.values.len() < min_obs {
        return Err(Error::InsufficientData(format!(
            "{}: {} observations, need at least {min_obs}",
            series.country,
            series.values.len()
        )));
    }
    let v = &series.values;
    let (h_i, l_i) = (h as i32, l as i32);
    let mut targets = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dates = Vec::new();
    for &t in v.keys() {
        let Some(&target) = v.get(&(t + h_i)) else {
            continue;
        };
        let lags: Option<Vec<f64>> = (0..=l_i).map(|j| v.get(&(t - j)).copied()).collect();
        let Some(lags) = lags else { continue };
        rows.push(1.0);
        rows.extend(lags);
        targets.push(target);
        dates.push(t + h_i);
    }
    let k = l + 2;
    if targets.len() <= k {
        return Err(Error::InsufficientData(format!(
            "{}: only {} complete forecast windows (gaps break lag windows)",
            series.country,
            targets.len()
        )));
    }
    let x = DMatrix::from_row_slice(targets.len(), k, &rows);
    let fit = ols_min_norm(&targets, &x)?;
    Ok(ShockSeries {
        country: series.country.clone(),
        shocks: dates
            .into_iter()
            .zip(fit.residuals)
            .map(|(d, e)| (d, 100.0 * e))
            .collect(),
        horizon_h: h,
        lag_l: l,
    })
}

/// Uses a series directly as the shock (percentage points, no filtering).
pub fn passthrough_shocks(series: &TransformedSeries) -> ShockSeries {
    ShockSeries {
        country: series.country.clone(),
        shocks: series
            .values
            .iter()
            .map(|(&t, &v)| (t, 100.0 * v))
            .collect(),
        horizon_h: 0,
        lag_l: 0,
    }
}

/// Shocks for every country of the panel. Hall-Barro-Redlick changes are
/// used as shocks directly; the other measures go through the regression.
pub fn extract_shocks(
    panel: &PanelDataset,
    kind: SeriesKind,
    h: usize,
    l: usize,
) -> Result<ShockSet> {
    let series = transform_panel(panel, kind)?;
    let shocks: Vec<ShockSeries> = series
        .par_iter()
        .map(|s| match kind {
            SeriesKind::HallBarroRedlick => Ok(passthrough_shocks(s)),
            _ => hamilton_shocks(s, h, l),
        })
        .collect::<Result<_>>()?;
    let mut set = ShockSet::default();
    for s in shocks {
        set.insert(s);
    }
    Ok(set)
}
