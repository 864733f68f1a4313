//! CSV readers and writers for raw calibration inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{
    Calibration, CalibrationConfig, Depreciation, EmissionLevels, InvestmentNetwork, UseTable,
};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

pub const HOUSEHOLD_ROW: &str = "HOUSEHOLD";
pub const GOVERNMENT_ROW: &str = "GOVERNMENT";
const FINAL_COLUMNS: [&str; 6] = [
    "labor_comp",
    "capital_comp",
    "household_final",
    "government_final",
    "investment_final",
    "gross_output",
];

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        let raw = self.rows[row].get(col).map(String::as_str).unwrap_or("");
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NonNumeric {
                row: row + 2,
                column: self.headers[col].clone(),
                value: raw.to_string(),
            })
    }

    fn text(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).map(String::as_str).unwrap_or("")
    }
}

fn code_index(codes: &[String], code: &str, row: usize, column: &str) -> Result<usize> {
    codes
        .iter()
        .position(|c| c == code)
        .ok_or_else(|| Error::NonNumeric {
            row: row + 2,
            column: column.to_string(),
            value: format!("{code} (unknown industry code)"),
        })
}

/// `code,label,<one column per user code>,labor_comp,capital_comp,
/// household_final,government_final,investment_final,gross_output`
pub fn read_use_table(path: &Path) -> Result<UseTable> {
    let t = Table::read(path)?;
    let (cc, lc) = (t.col("code")?, t.col("label")?);
    let codes: Vec<String> = (0..t.rows.len())
        .map(|r| t.text(r, cc).to_string())
        .collect();
    let n = codes.len();
    let user_cols: Vec<usize> = codes.iter().map(|c| t.col(c)).collect::<Result<_>>()?;
    let fin: Vec<usize> = FINAL_COLUMNS
        .iter()
        .map(|c| t.col(c))
        .collect::<Result<_>>()?;
    let mut intermediate = DMatrix::zeros(n, n);
    let mut v = vec![vec![0.0; n]; FINAL_COLUMNS.len()];
    for r in 0..n {
        for (j, &c) in user_cols.iter().enumerate() {
            intermediate[(r, j)] = t.num(r, c)?;
        }
        for (k, &c) in fin.iter().enumerate() {
            v[k][r] = t.num(r, c)?;
        }
    }
    let mut v = v.into_iter();
    let mut next = || v.next().expect("six columns");
    Ok(UseTable {
        codes,
        labels: (0..n).map(|r| t.text(r, lc).to_string()).collect(),
        intermediate,
        labor_comp: next(),
        capital_comp: next(),
        household_final: next(),
        government_final: next(),
        investment_final: next(),
        gross_output: next(),
    })
}

pub fn write_use_table(path: &Path, table: &UseTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["code".to_string(), "label".to_string()];
    header.extend(table.codes.iter().cloned());
    header.extend(FINAL_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for i in 0..table.n() {
        let mut rec = vec![table.codes[i].clone(), table.labels[i].clone()];
        rec.extend(table.intermediate.row(i).iter().map(|v| v.to_string()));
        for v in [
            &table.labor_comp,
            &table.capital_comp,
            &table.household_final,
            &table.government_final,
            &table.investment_final,
            &table.gross_output,
        ] {
            rec.push(v[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `code,<one column per investing industry code>`, rows in any order.
pub fn read_investment_network(path: &Path, codes: &[String]) -> Result<DMatrix<f64>> {
    let t = Table::read(path)?;
    let cc = t.col("code")?;
    let cols: Vec<usize> = codes.iter().map(|c| t.col(c)).collect::<Result<_>>()?;
    let n = codes.len();
    let mut m = DMatrix::zeros(n, n);
    let mut seen = vec![false; n];
    for r in 0..t.rows.len() {
        let i = code_index(codes, t.text(r, cc), r, "code")?;
        seen[i] = true;
        for (j, &c) in cols.iter().enumerate() {
            m[(i, j)] = t.num(r, c)?;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!(
            "{}: no row for industry {}",
            path.display(),
            codes[i]
        )));
    }
    Ok(m)
}

fn write_matrix(path: &Path, codes: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["code".to_string()];
    header.extend(codes.iter().cloned());
    w.write_record(&header)?;
    for (i, code) in codes.iter().enumerate() {
        let mut rec = vec![code.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long format `industry,year,rate`.
pub fn read_depreciation(path: &Path, codes: &[String]) -> Result<Depreciation> {
    let t = Table::read(path)?;
    let (ic, yc, rc) = (t.col("industry")?, t.col("year")?, t.col("rate")?);
    let mut rates: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let i = code_index(codes, t.text(r, ic), r, "industry")?;
        let year = t.num(r, yc)? as i32;
        let rate = t.num(r, rc)?;
        rates
            .entry(year)
            .or_insert_with(|| vec![f64::NAN; codes.len()])[i] = rate;
    }
    Ok(Depreciation { rates })
}

/// `industry,level`, with `HOUSEHOLD` and `GOVERNMENT` rows for final users.
pub fn read_emissions(path: &Path, codes: &[String]) -> Result<EmissionLevels> {
    let t = Table::read(path)?;
    let (ic, lc) = (t.col("industry")?, t.col("level")?);
    let mut out = EmissionLevels {
        industry: vec![0.0; codes.len()],
        household: 0.0,
        government: 0.0,
    };
    for r in 0..t.rows.len() {
        let level = t.num(r, lc)?;
        match t.text(r, ic) {
            HOUSEHOLD_ROW => out.household += level,
            GOVERNMENT_ROW => out.government += level,
            code => out.industry[code_index(codes, code, r, "industry")?] += level,
        }
    }
    Ok(out)
}

/// Many-to-one map from source industry codes to target industries.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryMapping {
    pub source_codes: Vec<String>,
    pub target_index: Vec<usize>,
    pub target_labels: Vec<String>,
}

impl IndustryMapping {
    pub fn n_targets(&self) -> usize {
        self.target_labels.len()
    }

    pub fn target_codes(&self) -> Vec<String> {
        (0..self.n_targets()).map(|t| format!("T{t}")).collect()
    }

    /// Target index of each of `codes`.
    pub fn indices(&self, codes: &[String]) -> Result<Vec<usize>> {
        codes
            .iter()
            .map(|c| {
                self.source_codes
                    .iter()
                    .position(|s| s == c)
                    .map(|k| self.target_index[k])
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("industry code {c} is not in the mapping"))
                    })
            })
            .collect()
    }

    pub fn aggregate_matrix(&self, m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
        let k = self.n_targets();
        let mut out = DMatrix::zeros(k, k);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(idx[i], idx[j])] += m[(i, j)];
            }
        }
        out
    }
}

/// `source_code,target_index[,target_label]`; target indices are 0-based and
/// must cover `0..k` without holes.
pub fn read_mapping(path: &Path) -> Result<IndustryMapping> {
    let t = Table::read(path)?;
    let (sc, tc) = (t.col("source_code")?, t.col("target_index")?);
    let lc = t.col("target_label").ok();
    let mut source_codes = Vec::new();
    let mut target_index = Vec::new();
    let mut labels: BTreeMap<usize, String> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let code = t.text(r, sc).to_string();
        if source_codes.contains(&code) {
            return Err(Error::InvalidInput(format!(
                "mapping lists source code {code} twice"
            )));
        }
        let raw = t.text(r, tc);
        let target = raw.parse::<usize>().map_err(|_| Error::NonNumeric {
            row: r + 2,
            column: "target_index".into(),
            value: raw.to_string(),
        })?;
        let label = lc
            .map(|c| t.text(r, c).to_string())
            .filter(|s| !s.is_empty());
        let entry = labels
            .entry(target)
            .or_insert_with(|| format!("industry {target}"));
        if let Some(l) = label {
            *entry = l;
        }
        source_codes.push(code);
        target_index.push(target);
    }
    let k = labels.len();
    if labels.keys().copied().ne(0..k) {
        return Err(Error::InvalidInput(
            "mapping target indices must be 0..k without gaps".into(),
        ));
    }
    Ok(IndustryMapping {
        source_codes,
        target_index,
        target_labels: labels.into_values().collect(),
    })
}

/// Everything needed to build a calibration, as laid out in a directory:
/// `use_table.csv`, `investment_network_YYYY.csv`, `depreciation.csv`,
/// `emissions_shares.csv`, and optionally `mapping.csv` and `calibration.conf`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInputs {
    pub table: UseTable,
    pub investment: InvestmentNetwork,
    pub depreciation: Depreciation,
    pub emissions: EmissionLevels,
    pub config: CalibrationConfig,
}

impl RawInputs {
    pub const CONFIG_FILE: &'static str = "calibration.conf";

    pub fn load(dir: &Path) -> Result<Self> {
        let mut table = read_use_table(&dir.join("use_table.csv"))?;
        let codes = table.codes.clone();
        let mut investment = InvestmentNetwork::default();
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
            if let Some(year) = name
                .strip_prefix("investment_network_")
                .and_then(|s| s.strip_suffix(".csv"))
                .and_then(|s| s.parse::<i32>().ok())
            {
                investment
                    .flows
                    .insert(year, read_investment_network(&p, &codes)?);
            }
        }
        let mut depreciation = read_depreciation(&dir.join("depreciation.csv"), &codes)?;
        let mut emissions = read_emissions(&dir.join("emissions_shares.csv"), &codes)?;
        let config_path = dir.join(Self::CONFIG_FILE);
        let config = if config_path.exists() {
            CalibrationConfig::from_key_values(&KeyValues::read(&config_path)?)?
        } else {
            CalibrationConfig::default()
        };
        let mapping_path = dir.join("mapping.csv");
        if mapping_path.exists() {
            let mapping = read_mapping(&mapping_path)?;
            let idx = mapping.indices(&codes)?;
            let k = mapping.n_targets();
            for m in investment.flows.values_mut() {
                *m = mapping.aggregate_matrix(m, &idx);
            }
            for rates in depreciation.rates.values_mut() {
                let mut num = vec![0.0; k];
                let mut den = vec![0.0; k];
                for (s, &t) in idx.iter().enumerate() {
                    if rates[s].is_finite() {
                        let w = table.capital_comp[s].max(f64::MIN_POSITIVE);
                        num[t] += w * rates[s];
                        den[t] += w;
                    }
                }
                *rates = (0..k)
                    .map(|t| {
                        if den[t] > 0.0 {
                            num[t] / den[t]
                        } else {
                            f64::NAN
                        }
                    })
                    .collect();
            }
            let mut ind = vec![0.0; k];
            for (s, &t) in idx.iter().enumerate() {
                ind[t] += emissions.industry[s];
            }
            emissions.industry = ind;
            table = table.aggregate(&mapping)?;
        }
        table.balance()?;
        Ok(Self {
            table,
            investment,
            depreciation,
            emissions,
            config,
        })
    }

    pub fn build(&self) -> Result<Calibration> {
        super::build_calibration(
            &self.table,
            &self.investment,
            &self.depreciation,
            &self.emissions,
            &self.config,
        )
    }

    /// Writes the inputs in the layout read by [`RawInputs::load`].
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let codes = &self.table.codes;
        write_use_table(&dir.join("use_table.csv"), &self.table)?;
        for (year, m) in &self.investment.flows {
            write_matrix(
                &dir.join(format!("investment_network_{year}.csv")),
                codes,
                m,
            )?;
        }
        let path = dir.join("depreciation.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["industry", "year", "rate"])?;
        for (year, rates) in &self.depreciation.rates {
            for (code, r) in codes.iter().zip(rates) {
                if r.is_finite() {
                    w.write_record([code.clone(), year.to_string(), r.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let path = dir.join("emissions_shares.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["industry", "level"])?;
        for (code, l) in codes.iter().zip(&self.emissions.industry) {
            w.write_record([code.clone(), l.to_string()])?;
        }
        w.write_record([
            HOUSEHOLD_ROW.to_string(),
            self.emissions.household.to_string(),
        ])?;
        w.write_record([
            GOVERNMENT_ROW.to_string(),
            self.emissions.government.to_string(),
        ])?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        let c = &self.config;
        let mut conf = format!(
            "beta = {}\nfrisch = {}\nmaintenance_share = {}\nbase_mil_share = {}\n",
            c.beta_disc, c.frisch, c.maintenance_share, c.base_mil_share
        );
        let quote_list = |v: &[String]| v.join(";");
        if let Some(w) = &c.weapon_labels {
            conf += &format!("weapon_set = {}\n", quote_list(w));
        }
        if let Some(e) = &c.energy_labels {
            conf += &format!("energy_set = {}\n", quote_list(e));
        }
        for (k, v) in [("s_p", c.s_p), ("s_e", c.s_e)] {
            if let Some(v) = v {
                conf += &format!("{k} = {v}\n");
            }
        }
        if let Some(y) = c.target_year {
            conf += &format!("target_year = {y}\n");
        }
        let path = dir.join(Self::CONFIG_FILE);
        std::fs::write(&path, conf).map_err(|e| Error::io(&path, e))
    }
}
