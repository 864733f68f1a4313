//! Seeded synthetic inputs: production economies whose use tables are an
//! exact steady state, and country panels.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibration::{
    CalibrationConfig, Depreciation, EmissionLevels, InvestmentNetwork, RawInputs, UseTable,
};
use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PanelObservation};

pub const DEFAULT_SEED: u64 = 20_250_417;

/// Primitive parameters of a steady-state economy with unit prices.
#[derive(Debug, Clone, PartialEq)]
pub struct EconomySpec {
    pub labels: Vec<String>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    /// column-stochastic, `omega[(j, i)]` share of input `j` in user `i`
    pub omega: DMatrix<f64>,
    /// column-stochastic investment shares
    pub chi: DMatrix<f64>,
    pub depreciation: Vec<f64>,
    pub beta_disc: f64,
    pub household: Vec<f64>,
    pub government: Vec<f64>,
    /// emissions per unit of gross output
    pub emission_intensity: Vec<f64>,
    pub household_emissions: f64,
    pub government_emissions: f64,
}

impl EconomySpec {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Investment spending per unit of gross output in the steady state.
    pub fn investment_rate(&self, i: usize) -> f64 {
        let (b, d) = (self.beta_disc, self.depreciation[i]);
        d * b * (1.0 - self.alpha[i]) * self.theta[i] / (1.0 - b * (1.0 - d))
    }

    /// Gross output solving `g = (A + chi S) g + household + government`.
    pub fn gross_output(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let direct = if i == j { 1.0 } else { 0.0 };
            direct
                - self.omega[(i, j)] * (1.0 - self.theta[j])
                - self.chi[(i, j)] * self.investment_rate(j)
        });
        let fd = DVector::from_iterator(n, (0..n).map(|i| self.household[i] + self.government[i]));
        let g = m
            .lu()
            .solve(&fd)
            .ok_or_else(|| Error::Singular("synthetic economy has no steady state".into()))?;
        if g.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(
                "synthetic economy has non-positive gross output".into(),
            ));
        }
        Ok(g.iter().copied().collect())
    }

    /// Use table, investment network, depreciation and emissions of the
    /// steady state, with prices normalized to one.
    pub fn raw_inputs(&self, year: i32, config: CalibrationConfig) -> Result<RawInputs> {
        let n = self.n();
        let g = self.gross_output()?;
        let intermediate = DMatrix::from_fn(n, n, |i, j| {
            self.omega[(i, j)] * (1.0 - self.theta[j]) * g[j]
        });
        let flows = DMatrix::from_fn(n, n, |i, j| {
            self.chi[(i, j)] * self.investment_rate(j) * g[j]
        });
        let table = UseTable {
            codes: (1..=n).map(|i| format!("S{i:02}")).collect(),
            labels: self.labels.clone(),
            intermediate,
            labor_comp: (0..n)
                .map(|i| self.alpha[i] * self.theta[i] * g[i])
                .collect(),
            capital_comp: (0..n)
                .map(|i| (1.0 - self.alpha[i]) * self.theta[i] * g[i])
                .collect(),
            household_final: self.household.clone(),
            government_final: self.government.clone(),
            investment_final: (0..n).map(|i| flows.row(i).sum()).collect(),
            gross_output: g.clone(),
        };
        Ok(RawInputs {
            table,
            investment: InvestmentNetwork::single(year, flows),
            depreciation: Depreciation {
                rates: BTreeMap::from([(year, self.depreciation.clone())]),
            },
            emissions: EmissionLevels {
                industry: (0..n).map(|i| self.emission_intensity[i] * g[i]).collect(),
                household: self.household_emissions,
                government: self.government_emissions,
            },
            config,
        })
    }
}

fn dirichlet_column(rng: &mut ChaCha8Rng, weights: &[f64]) -> Vec<f64> {
    let draws: Vec<f64> = weights
        .iter()
        .map(|w| w * rng.random_range(0.2..1.0))
        .collect();
    let s: f64 = draws.iter().sum();
    draws.iter().map(|d| d / s).collect()
}

/// A random economy of `n` industries. The first industry is a weapon
/// producer and the last an energy producer when `n >= 2`.
pub fn random_economy(n: usize, rng: &mut ChaCha8Rng) -> EconomySpec {
    let mut labels: Vec<String> = (0..n).map(|i| format!("Industry {i}")).collect();
    if n >= 2 {
        labels[0] = "Fabricated metal products".into();
        labels[n - 1] = "Utilities".into();
    }
    let mut omega = DMatrix::zeros(n, n);
    let mut chi = DMatrix::zeros(n, n);
    for i in 0..n {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_range(0.0..1.0) < 0.25 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let w = if w.iter().sum::<f64>() == 0.0 {
            vec![1.0; n]
        } else {
            w
        };
        for (j, v) in dirichlet_column(rng, &w).into_iter().enumerate() {
            omega[(j, i)] = v;
        }
        for (j, v) in dirichlet_column(rng, &vec![1.0; n]).into_iter().enumerate() {
            chi[(j, i)] = v;
        }
    }
    EconomySpec {
        labels,
        theta: (0..n).map(|_| rng.random_range(0.3..0.8)).collect(),
        alpha: (0..n).map(|_| rng.random_range(0.4..0.8)).collect(),
        omega,
        chi,
        depreciation: (0..n).map(|_| rng.random_range(0.05..0.25)).collect(),
        beta_disc: 0.98,
        household: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        government: (0..n).map(|_| rng.random_range(0.05..0.5)).collect(),
        emission_intensity: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        household_emissions: rng.random_range(0.05..0.5),
        government_emissions: rng.random_range(0.0..0.1),
    }
}

/// Inputs of a random economy, calibrated without maintenance investment so
/// the calibration is an exact steady state.
pub fn random_inputs(n: usize, seed: u64) -> Result<RawInputs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_economy(n, &mut rng);
    let config = CalibrationConfig {
        maintenance_share: 0.0,
        ..Default::default()
    };
    spec.raw_inputs(2017, config)
}

pub const US_INDUSTRIES: [&str; 41] = [
    "Farms",
    "Forestry, fishing, and related activities",
    "Oil and gas extraction",
    "Mining, except oil and gas",
    "Support activities for mining",
    "Utilities",
    "Construction",
    "Wood products",
    "Nonmetallic mineral products",
    "Primary metals",
    "Fabricated metal products",
    "Machinery",
    "Computer and electronic products",
    "Electrical equipment, appliances, and components",
    "Motor vehicles, bodies and trailers, and parts",
    "Other transportation equipment",
    "Furniture and related products",
    "Miscellaneous manufacturing",
    "Food and beverage and tobacco products",
    "Textile mills and textile product mills",
    "Apparel and leather and allied products",
    "Paper products",
    "Printing and related support activities",
    "Petroleum and coal products",
    "Chemical products",
    "Plastics and rubber products",
    "Wholesale trade",
    "Retail trade",
    "Air transportation",
    "Rail transportation",
    "Water transportation",
    "Truck transportation",
    "Other transportation and warehousing",
    "Information",
    "Finance and insurance",
    "Real estate",
    "Professional, scientific, and technical services",
    "Administrative and waste management services",
    "Educational services, health care, and social assistance",
    "Arts, entertainment, and recreation",
    "Accommodation and food services",
];

fn us_index(label: &str) -> usize {
    US_INDUSTRIES
        .iter()
        .position(|l| *l == label)
        .expect("known industry")
}

/// A 41-industry economy loosely shaped like the US: energy and metals are
/// emission intensive, capital goods dominate investment, and the weapon and
/// energy industries have government sales. The inputs ship with the default
/// 12.5% maintenance share and three investment network years.
pub fn us_like_inputs(seed: u64) -> Result<RawInputs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = US_INDUSTRIES.len();
    let idx = us_index;
    let energy = [
        idx("Utilities"),
        idx("Petroleum and coal products"),
        idx("Oil and gas extraction"),
    ];
    let hubs = [
        idx("Wholesale trade"),
        idx("Finance and insurance"),
        idx("Real estate"),
        idx("Professional, scientific, and technical services"),
        idx("Administrative and waste management services"),
        idx("Truck transportation"),
    ];
    let capital_goods = [
        (idx("Construction"), 6.0),
        (idx("Machinery"), 3.0),
        (idx("Computer and electronic products"), 2.0),
        (idx("Motor vehicles, bodies and trailers, and parts"), 1.5),
        (idx("Other transportation equipment"), 1.0),
        (idx("Fabricated metal products"), 1.0),
        (idx("Professional, scientific, and technical services"), 2.0),
        (idx("Information"), 1.5),
        (idx("Wholesale trade"), 0.8),
        (idx("Electrical equipment, appliances, and components"), 0.7),
    ];
    let metal_users = [
        idx("Fabricated metal products"),
        idx("Machinery"),
        idx("Motor vehicles, bodies and trailers, and parts"),
        idx("Other transportation equipment"),
        idx("Electrical equipment, appliances, and components"),
        idx("Construction"),
    ];

    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut w = vec![0.0; n];
        for j in 0..n {
            if rng.random_range(0.0..1.0) < 0.3 {
                w[j] = 0.3;
            }
        }
        w[i] += 3.0;
        for &e in &energy {
            w[e] += 0.8;
        }
        for &h in &hubs {
            w[h] += 1.0;
        }
        if metal_users.contains(&i) {
            w[idx("Primary metals")] += 3.0;
            w[idx("Fabricated metal products")] += 1.0;
        }
        if i == idx("Utilities") || i == idx("Petroleum and coal products") {
            w[idx("Oil and gas extraction")] += 4.0;
            w[idx("Mining, except oil and gas")] += 1.0;
        }
        if i == idx("Primary metals") {
            w[idx("Mining, except oil and gas")] += 2.0;
            w[idx("Utilities")] += 2.0;
        }
        for (j, v) in dirichlet_column(&mut rng, &w).into_iter().enumerate() {
            omega[(j, i)] = v;
        }
    }
    let chi_for = |rng: &mut ChaCha8Rng| {
        let mut chi = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut w = vec![0.02; n];
            for &(k, v) in &capital_goods {
                w[k] += v;
            }
            for (j, v) in dirichlet_column(rng, &w).into_iter().enumerate() {
                chi[(j, i)] = v;
            }
        }
        chi
    };
    let chi = chi_for(&mut rng);

    let mut intensity = vec![0.05; n];
    for (label, v) in [
        ("Utilities", 6.0),
        ("Petroleum and coal products", 3.0),
        ("Primary metals", 2.5),
        ("Oil and gas extraction", 1.5),
        ("Mining, except oil and gas", 1.2),
        ("Nonmetallic mineral products", 2.0),
        ("Chemical products", 1.0),
        ("Air transportation", 1.8),
        ("Water transportation", 1.5),
        ("Truck transportation", 1.2),
        ("Rail transportation", 1.0),
        ("Farms", 0.8),
        ("Paper products", 0.7),
        ("Fabricated metal products", 0.4),
        ("Other transportation equipment", 0.2),
    ] {
        intensity[idx(label)] = v;
    }
    let mut household: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.3)).collect();
    for (label, v) in [
        ("Real estate", 8.0),
        (
            "Educational services, health care, and social assistance",
            7.0,
        ),
        ("Retail trade", 5.0),
        ("Finance and insurance", 4.0),
        ("Food and beverage and tobacco products", 3.0),
        ("Accommodation and food services", 3.0),
        ("Information", 2.0),
        ("Motor vehicles, bodies and trailers, and parts", 1.5),
        ("Utilities", 1.0),
        ("Petroleum and coal products", 1.0),
        ("Arts, entertainment, and recreation", 1.0),
        ("Apparel and leather and allied products", 0.8),
    ] {
        household[idx(label)] = v;
    }
    let mut government: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..0.05)).collect();
    for (label, v) in [
        (
            "Educational services, health care, and social assistance",
            2.0,
        ),
        ("Construction", 1.0),
        ("Professional, scientific, and technical services", 0.8),
        ("Fabricated metal products", 0.12),
        ("Other transportation equipment", 0.18),
        ("Utilities", 0.025),
        ("Petroleum and coal products", 0.02),
    ] {
        government[idx(label)] = v;
    }
    let spec = EconomySpec {
        labels: US_INDUSTRIES.iter().map(|s| s.to_string()).collect(),
        theta: (0..n).map(|_| rng.random_range(0.35..0.65)).collect(),
        alpha: (0..n).map(|_| rng.random_range(0.45..0.75)).collect(),
        omega,
        chi,
        depreciation: (0..n).map(|_| rng.random_range(0.06..0.16)).collect(),
        beta_disc: 0.98,
        household,
        government,
        emission_intensity: intensity,
        household_emissions: 0.0,
        government_emissions: 0.0,
    };
    let mut inputs = spec.raw_inputs(2017, CalibrationConfig::default())?;
    let industry_total: f64 = inputs.emissions.industry.iter().sum();
    inputs.emissions.household = 0.2 * industry_total;
    inputs.emissions.government = 0.02 * industry_total;
    // earlier investment network years with perturbed shares
    let flows_2017 = inputs.investment.flows[&2017].clone();
    for year in [2015, 2016] {
        let m = DMatrix::from_fn(n, n, |i, j| flows_2017[(i, j)] * rng.random_range(0.7..1.3));
        inputs.investment.flows.insert(year, m);
    }
    let mut rates = BTreeMap::new();
    for year in 1990..=2017 {
        let r: Vec<f64> = spec
            .depreciation
            .iter()
            .map(|d| {
                if year == 2017 {
                    *d
                } else {
                    d * rng.random_range(0.9..1.1)
                }
            })
            .collect();
        rates.insert(year, r);
    }
    inputs.depreciation = Depreciation { rates };
    Ok(inputs)
}

/// Options for a synthetic country panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub countries: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Response of log emissions (in percent) to a one point rise in the
    /// military share, by years since the rise.
    pub emission_response: Vec<f64>,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self {
            countries: 20,
            first_year: 1970,
            last_year: 2016,
            emission_response: vec![0.0, 0.3, 0.6, 0.9, 1.0, 0.9, 0.7, 0.5, 0.3, 0.1],
        }
    }
}

/// A balanced panel with every stored variable populated. Military shares
/// follow a persistent AR(2); emissions and energy use respond to changes in
/// the share with a hump-shaped profile.
pub fn synthetic_panel(spec: &PanelSpec, seed: u64) -> Result<PanelDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let years: Vec<i32> = (spec.first_year..=spec.last_year).collect();
    let mut obs = Vec::new();
    for c in 0..spec.countries {
        let country = format!("C{c:02}");
        let mean_share: f64 = rng.random_range(0.01..0.05);
        let base_intensity = rng.random_range(0.2..1.5);
        let growth = rng.random_range(0.01..0.03);
        let mut share = vec![mean_share; years.len()];
        for t in 2..years.len() {
            let e = 0.003 * noise.sample(&mut rng);
            share[t] = (mean_share + 1.2 * (share[t - 1] - mean_share)
                - 0.3 * (share[t - 2] - mean_share)
                + e)
                .max(0.002);
        }
        let mut log_gdp = rng.random_range(5.0..8.0);
        let mut inflation = 0.0;
        let mut log_pop = rng.random_range(1.0..5.0);
        let mut log_exports = log_gdp - 1.5;
        let mut log_imports = log_gdp - 1.4;
        let mut dem: f64 = rng.random_range(0.2..0.9);
        for (t, &year) in years.iter().enumerate() {
            log_gdp += growth + 0.015 * noise.sample(&mut rng);
            log_pop += 0.01 + 0.005 * noise.sample(&mut rng);
            inflation += 0.02 + 0.005 * noise.sample(&mut rng);
            log_exports += growth + 0.04 * noise.sample(&mut rng);
            log_imports += growth + 0.04 * noise.sample(&mut rng);
            dem = (dem + 0.02 * noise.sample(&mut rng)).clamp(0.0, 1.0);
            let mut response = 0.0;
            for (k, r) in spec.emission_response.iter().enumerate() {
                if t > k {
                    response += r * 100.0 * (share[t - k] - share[t - k - 1]);
                }
            }
            let trend_intensity = base_intensity * (-0.01 * t as f64).exp();
            let log_em =
                log_gdp + trend_intensity.ln() + response / 100.0 + 0.01 * noise.sample(&mut rng);
            let real_gdp = log_gdp.exp();
            let deflator = inflation.exp();
            let emissions = log_em.exp();
            obs.push(PanelObservation {
                country: country.clone(),
                year,
                mil_share: Some(share[t]),
                nominal_gdp: Some(real_gdp * deflator),
                real_gdp: Some(real_gdp),
                deflator: Some(deflator),
                emissions: Some(emissions),
                energy_use: Some(emissions * rng.random_range(1.8..2.2)),
                gdp_pc: Some(real_gdp / log_pop.exp()),
                exports: Some(log_exports.exp()),
                imports: Some(log_imports.exp()),
                democracy: Some(dem),
                steel: Some(real_gdp * 0.01 * (1.0 + 0.1 * noise.sample(&mut rng)).max(0.1)),
                patents_total: Some((real_gdp * 0.05).round()),
                patents_green: Some((real_gdp * 0.005).round()),
            });
        }
    }
    PanelDataset::from_observations(obs)
}

/// Twenty NATO-like countries, 1970 to 2016.
pub fn nato_panel(seed: u64) -> Result<PanelDataset> {
    synthetic_panel(&PanelSpec::default(), seed)
}

/// Thirty-eight countries with a wide spread of emission intensities, for
/// the high/low split.
pub fn intensity_panel(seed: u64) -> Result<PanelDataset> {
    synthetic_panel(
        &PanelSpec {
            countries: 38,
            ..Default::default()
        },
        seed,
    )
}
