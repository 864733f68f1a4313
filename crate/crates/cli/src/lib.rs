//! Command-line front end: shock extraction, local projections,
//! calibration, steady states, transitions, sweeps and damage reports.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use milspend_core::calibration::RawInputs;
use milspend_core::kv::KeyValues;
use milspend_core::lp::write_plotdata;
use milspend_core::scenario::{emissions_report, parse_grid, sweep, ResolvedScenario};
use milspend_core::solve::solve_steady_with;
use milspend_core::synthetic::{intensity_panel, nato_panel, us_like_inputs, DEFAULT_SEED};
use milspend_core::{
    classify_emission_intensity, estimate_lp, extract_shocks, government_path, load_panel,
    scc_damages, solve_transition, spillover_lp, split_lp, Calibration, ColumnSchema, DamageSpec,
    Error, IrfResult, LpSpec, Outcome, PanelDataset, PanelVariable, Preset, ScenarioSpec,
    SeriesKind, ShockSet, SolverOptions,
};

#[derive(Parser, Debug)]
#[command(
    name = "milspend",
    version,
    about = "Military spending shocks, emissions and production-network counterfactuals"
)]
struct Cli {
    /// Seed for synthetic inputs.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Newton convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forecast-error shocks from a country-year panel.
    ExtractShocks(ExtractArgs),
    /// Panel local projections of an outcome on shocks.
    Lp(LpArgs),
    /// Builds model parameters from input-output tables.
    Calibrate(CalibrateArgs),
    /// Steady-state response to a permanent shock.
    Steady(SteadyArgs),
    /// Perfect-foresight transition path of a scenario.
    Transition(TransitionArgs),
    /// Steady-state emissions over a grid of shock sizes for each preset.
    Sweep(SweepArgs),
    /// Social-cost-of-carbon damages of emission changes.
    Damages(DamagesArgs),
    /// Shocks, projections, steady state and transition in one run.
    Pipeline(PipelineArgs),
    /// Writes the synthetic example inputs.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Measure {
    Share,
    Gk,
    Hbr,
}

impl From<Measure> for SeriesKind {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Share => SeriesKind::LevelShare,
            Measure::Gk => SeriesKind::GordonKrenn,
            Measure::Hbr => SeriesKind::HallBarroRedlick,
        }
    }
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    /// Key-value file mapping field names to CSV columns.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gk")]
    var: Measure,
    #[arg(long, default_value_t = 2)]
    h: usize,
    #[arg(long, default_value_t = 2)]
    l: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    None,
    Intensity,
}

#[derive(Args, Debug)]
struct LpArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    shocks: PathBuf,
    /// Outcome column, e.g. emissions, real_gdp, emission_intensity.
    #[arg(long, default_value = "emissions")]
    outcome: String,
    /// Use 100 ln(outcome).
    #[arg(long)]
    log: bool,
    /// Largest horizon.
    #[arg(long = "T", default_value_t = 15)]
    horizon: usize,
    #[arg(long, default_value_t = 2)]
    lags: usize,
    #[arg(long, value_enum, default_value = "none")]
    split: Split,
    /// Source country whose shocks are applied to the allies.
    #[arg(long)]
    spillover_source: Option<String>,
    /// Comma-separated responding countries for a spillover projection.
    #[arg(long, value_delimiter = ',')]
    allies: Vec<String>,
    #[arg(long)]
    no_controls: bool,
    #[arg(long)]
    no_country_fe: bool,
    #[arg(long)]
    no_year_fe: bool,
    #[arg(long, default_value_t = 0.68)]
    ci: f64,
    #[arg(long, default_value_t = 2)]
    dk_lags: usize,
    /// With a split, `_high` and `_low` are appended to the file stem.
    #[arg(long)]
    out: PathBuf,
    /// Long-format CSV for plotting.
    #[arg(long)]
    plotdata: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Directory of input-output tables.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SteadyArgs {
    /// Input directory or calibration JSON.
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Checks the baseline row against published US figures (needs the
    /// original US inputs).
    #[arg(long)]
    validate_table2: bool,
}

#[derive(Args, Debug)]
struct TransitionArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// Initial horizon; doubled until the path settles.
    #[arg(long = "T", default_value_t = 200)]
    horizon: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Defaults to the synthetic 41-industry economy.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// start:stop:step in percentage points.
    #[arg(long, default_value = "0:14:0.25")]
    grid: String,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "personnel,baseline,material"
    )]
    presets: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DamagesArgs {
    /// Emission changes in percent.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    delta: Vec<f64>,
    /// Key-value file with scc, base_emissions_t, base_gdp.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    scc: Option<f64>,
    #[arg(long)]
    base_emissions: Option<f64>,
    #[arg(long)]
    base_gdp: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Defaults to a synthetic panel.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Defaults to the synthetic 41-industry economy.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Defaults to the baseline preset, 1 p.p., temporary.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gk")]
    var: Measure,
    #[arg(long = "T", default_value_t = 200)]
    horizon: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
}

/// Bad arguments or configuration values; exits with code 2.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(e: &anyhow::Error) -> (i32, &'static str) {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return (2, "config");
        }
        if let Some(core) = cause.downcast_ref::<Error>() {
            let cat = core.category();
            let name = match cat {
                milspend_core::ErrorCategory::Config => "config",
                milspend_core::ErrorCategory::Data => "data",
                milspend_core::ErrorCategory::Solver => "solver",
            };
            return (cat.exit_code(), name);
        }
    }
    (3, "data")
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    let name = command_name(&cli.command);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(summary) => {
            let mut line = json!({ "command": name, "status": "ok" });
            merge(&mut line, summary);
            println!("{line}");
            0
        }
        Err(e) => {
            let (code, category) = exit_code(&e);
            eprintln!("error: {e:#}");
            println!(
                "{}",
                json!({ "command": name, "status": "error", "category": category, "message": format!("{e:#}") })
            );
            code
        }
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::ExtractShocks(_) => "extract-shocks",
        Command::Lp(_) => "lp",
        Command::Calibrate(_) => "calibrate",
        Command::Steady(_) => "steady",
        Command::Transition(_) => "transition",
        Command::Sweep(_) => "sweep",
        Command::Damages(_) => "damages",
        Command::Pipeline(_) => "pipeline",
        Command::Fixture(_) => "fixture",
    }
}

fn solver_options(cli: &Cli) -> Result<SolverOptions> {
    let mut opts = SolverOptions::default();
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(config_err(format!("--tol must be positive, got {tol}")));
        }
        opts.tol = tol;
    }
    Ok(opts)
}

fn dispatch(cli: &Cli) -> Result<Value> {
    let opts = solver_options(cli)?;
    match &cli.command {
        Command::ExtractShocks(a) => cmd_extract(a),
        Command::Lp(a) => cmd_lp(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Steady(a) => cmd_steady(a, &opts),
        Command::Transition(a) => cmd_transition(a, &opts),
        Command::Sweep(a) => cmd_sweep(a, cli.seed, &opts),
        Command::Damages(a) => cmd_damages(a),
        Command::Pipeline(a) => cmd_pipeline(a, cli.seed, &opts),
        Command::Fixture(a) => cmd_fixture(a, cli.seed),
    }
}

/// Runs `write` against a temporary file next to `path`, then renames it
/// into place.
fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> milspend_core::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("temporary file in {}", dir.display()))?;
    write(tmp.path())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |p| {
        std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |p| {
        std::fs::write(p, text).map_err(|e| Error::io(p, e))
    })
}

fn read_panel(path: &Path, schema: Option<&Path>) -> Result<PanelDataset> {
    let schema = match schema {
        Some(s) => ColumnSchema::read(s)?,
        None => ColumnSchema::default(),
    };
    let panel = load_panel(path, &schema)?;
    if !panel.rejected.is_empty() {
        warn!(
            "{} rows rejected while loading {}",
            panel.rejected.len(),
            path.display()
        );
    }
    Ok(panel)
}

fn load_calibration(path: &Path) -> Result<Calibration> {
    if path.is_dir() {
        Ok(RawInputs::load(path)?.build()?)
    } else if path.exists() {
        Ok(Calibration::read_json(path)?)
    } else {
        Err(config_err(format!(
            "calibration {} does not exist",
            path.display()
        )))
    }
}

fn default_calibration(seed: u64) -> Result<Calibration> {
    Ok(us_like_inputs(seed)?.build()?)
}

fn read_scenario(path: &Path) -> Result<(ScenarioSpec, DamageSpec)> {
    if !path.exists() {
        return Err(config_err(format!(
            "scenario file {} does not exist",
            path.display()
        )));
    }
    let kv = KeyValues::read(path)?;
    let spec = ScenarioSpec::from_key_values(&kv).map_err(|e| config_err(e.to_string()))?;
    let damages = DamageSpec::from_key_values(&kv).map_err(|e| config_err(e.to_string()))?;
    Ok((spec, damages))
}

fn cmd_extract(a: &ExtractArgs) -> Result<Value> {
    let panel = read_panel(&a.input, a.schema.as_deref())?;
    let shocks = extract_shocks(&panel, a.var.into(), a.h, a.l)?;
    write_atomic(&a.out, |p| shocks.write_csv(p))?;
    let n: usize = shocks.0.values().map(|s| s.shocks.len()).sum();
    Ok(
        json!({ "outputs": [a.out], "countries": shocks.0.len(), "shocks": n, "rejected_rows": panel.rejected.len() }),
    )
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("irf");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn lp_spec(a: &LpArgs) -> LpSpec {
    LpSpec {
        horizon: a.horizon,
        lags: a.lags,
        controls: if a.no_controls {
            vec![]
        } else {
            LpSpec::default_controls()
        },
        country_fe: !a.no_country_fe,
        year_fe: !a.no_year_fe,
        ci_level: a.ci,
        dk_lags: a.dk_lags,
    }
}

fn cmd_lp(a: &LpArgs) -> Result<Value> {
    let variable = PanelVariable::parse(&a.outcome)
        .ok_or_else(|| config_err(format!("unknown outcome '{}'", a.outcome)))?;
    let outcome = if a.log {
        Outcome::log(variable)
    } else {
        Outcome::level(variable)
    };
    let panel = read_panel(&a.panel, a.schema.as_deref())?;
    let shocks = ShockSet::read_csv(&a.shocks)?;
    let spec = lp_spec(a);
    let mut series: Vec<(String, IrfResult, PathBuf)> = Vec::new();
    match (&a.spillover_source, a.split) {
        (Some(source), Split::None) => {
            if a.allies.is_empty() {
                return Err(config_err("--spillover-source needs --allies"));
            }
            let src = shocks
                .0
                .get(source)
                .ok_or_else(|| config_err(format!("no shocks for '{source}'")))?;
            let irf = spillover_lp(&panel, &a.allies, src, outcome, &spec)?;
            series.push(("spillover".into(), irf, a.out.clone()));
        }
        (Some(_), Split::Intensity) => {
            return Err(config_err("--split and --spillover-source are exclusive"))
        }
        (None, Split::None) => {
            series.push((
                "all".into(),
                estimate_lp(&panel, &shocks, outcome, &spec)?,
                a.out.clone(),
            ));
        }
        (None, Split::Intensity) => {
            let groups = classify_emission_intensity(&panel)?;
            let (high, low) = split_lp(&panel, &shocks, outcome, &spec, &groups)?;
            series.push(("high".into(), high, with_suffix(&a.out, "high")));
            series.push(("low".into(), low, with_suffix(&a.out, "low")));
        }
    }
    let mut outputs = Vec::new();
    for (_, irf, path) in &series {
        write_atomic(path, |p| irf.write_csv(p))?;
        outputs.push(path.clone());
    }
    if let Some(pd) = &a.plotdata {
        let refs: Vec<(&str, &IrfResult)> =
            series.iter().map(|(n, r, _)| (n.as_str(), r)).collect();
        write_atomic(pd, |p| write_plotdata(p, &refs))?;
        outputs.push(pd.clone());
    }
    let peak: Vec<Value> = series
        .iter()
        .map(|(n, r, _)| {
            let (h, b) = r.beta.iter().enumerate().fold((0, f64::NEG_INFINITY), |m, (h, &b)| if b > m.1 { (h, b) } else { m });
            json!({ "series": n, "peak_h": h, "peak_beta": b, "n_obs_h0": r.n_obs.first(), "dropped_nonpositive": r.dropped_nonpositive })
        })
        .collect();
    Ok(json!({ "outputs": outputs, "series": peak }))
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<Value> {
    let raw = RawInputs::load(&a.input)?;
    let calib = raw.build()?;
    write_json(&a.out, &calib)?;
    Ok(json!({
        "outputs": [a.out],
        "industries": calib.n,
        "weapon_set": calib.weapon_set.iter().map(|&i| &calib.labels[i]).collect::<Vec<_>>(),
        "energy_set": calib.energy_set.iter().map(|&i| &calib.labels[i]).collect::<Vec<_>>(),
        "S_P": calib.s_p,
        "S_E": calib.s_e,
    }))
}

/// Published baseline response to a permanent 1 p.p. buildup, in percent:
/// emissions, intensity, real GDP.
const REFERENCE_BASELINE: [f64; 3] = [0.9, 0.68, 0.22];
const REFERENCE_TOL_PP: f64 = 0.1;

fn steady_report(
    calib: &Calibration,
    spec: &ScenarioSpec,
    damages: &DamageSpec,
    opts: &SolverOptions,
) -> Result<milspend_core::scenario::EmissionsReport> {
    let g = government_path(spec, calib)?;
    if !g.is_permanent() {
        info!(
            "steady state uses the impact level of a temporary shock (persistence {})",
            spec.rho
        );
    }
    let sol = solve_steady_with(calib, &g.impact, opts)?;
    Ok(emissions_report(&sol, spec, calib, Some(damages))?)
}

fn cmd_steady(a: &SteadyArgs, opts: &SolverOptions) -> Result<Value> {
    let calib = load_calibration(&a.calib)?;
    let (spec, damages) = read_scenario(&a.scenario)?;
    let report = steady_report(&calib, &spec, &damages, opts)?;
    write_json(&a.out, &report)?;
    let mut summary = json!({
        "outputs": [a.out],
        "emissions_pct": report.emissions_pct,
        "intensity_pct": report.intensity_pct,
        "real_gdp_pct": report.real_gdp_pct,
        "decomposition_residual": report.decomposition_residual,
    });
    if a.validate_table2 {
        let got = [
            report.emissions_pct,
            report.intensity_pct,
            report.real_gdp_pct,
        ];
        let ok = got
            .iter()
            .zip(REFERENCE_BASELINE)
            .all(|(g, t)| (g - t).abs() <= REFERENCE_TOL_PP);
        merge(
            &mut summary,
            json!({ "table2_target": REFERENCE_BASELINE, "table2_match": ok }),
        );
        if !ok {
            return Err(Error::Invariant(format!(
                "baseline response {got:?} differs from {REFERENCE_BASELINE:?} by more than {REFERENCE_TOL_PP} p.p."
            ))
            .into());
        }
    }
    Ok(summary)
}

fn mean_over(set: &[usize], g: &[f64]) -> f64 {
    if set.is_empty() {
        1.0
    } else {
        set.iter().map(|&i| g[i]).sum::<f64>() / set.len() as f64
    }
}

fn transition_csv(calib: &Calibration, sol: &milspend_core::TransitionSolution) -> String {
    let mut out = String::from("t,g_weapon,g_energy,emissions_pct,real_gdp_pct,intensity_pct,consumption_pct,capital_pct\n");
    for (t, (a, s)) in sol.aggregates.iter().zip(&sol.path).enumerate() {
        let g = &sol.g_path[t];
        let k: f64 =
            s.k.iter()
                .zip(&calib.gross_output)
                .map(|(k, w)| k * w)
                .sum::<f64>()
                / calib.gross_output.iter().sum::<f64>();
        out += &format!(
            "{t},{},{},{},{},{},{},{}\n",
            mean_over(&calib.weapon_set, g),
            mean_over(&calib.energy_set, g),
            100.0 * (a.emissions - 1.0),
            100.0 * (a.real_gdp - 1.0),
            100.0 * (a.intensity - 1.0),
            100.0 * (s.c - 1.0),
            100.0 * (k - 1.0),
        );
    }
    out
}

fn run_transition(
    calib: &Calibration,
    spec: &ScenarioSpec,
    horizon: usize,
    opts: &SolverOptions,
    out: &Path,
) -> Result<Value> {
    if horizon == 0 {
        return Err(config_err("--T must be positive"));
    }
    let g = government_path(spec, calib)?;
    let sol = solve_transition(calib, &g, horizon, opts)?;
    write_text(out, &transition_csv(calib, &sol))?;
    let peak = sol
        .aggregates
        .iter()
        .map(|a| 100.0 * (a.emissions - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(json!({
        "outputs": [out],
        "horizon": sol.horizon,
        "terminal_gap": sol.terminal_gap,
        "peak_emissions_pct": peak,
    }))
}

fn cmd_transition(a: &TransitionArgs, opts: &SolverOptions) -> Result<Value> {
    let calib = load_calibration(&a.calib)?;
    let (spec, _) = read_scenario(&a.scenario)?;
    run_transition(&calib, &spec, a.horizon, opts, &a.out)
}

fn cmd_sweep(a: &SweepArgs, seed: u64, opts: &SolverOptions) -> Result<Value> {
    let grid = parse_grid(&a.grid).map_err(config_err)?;
    let presets: Vec<Preset> = a
        .presets
        .iter()
        .map(|p| match p.parse::<Preset>() {
            Ok(Preset::Custom) => Err(config_err("the custom preset has no fixed shares")),
            Ok(p) => Ok(p),
            Err(e) => Err(config_err(e)),
        })
        .collect::<Result<_>>()?;
    let calib = match &a.calib {
        Some(p) => load_calibration(p)?,
        None => default_calibration(seed)?,
    };
    let points = sweep(&calib, &presets, &grid, opts)?;
    let mut csv = String::from("preset,e_pp,emissions_pct,real_gdp_pct,intensity_pct\n");
    for p in &points {
        csv += &format!(
            "{},{},{},{},{}\n",
            p.preset.name(),
            p.e_pp,
            p.emissions_pct,
            p.real_gdp_pct,
            p.intensity_pct
        );
    }
    write_text(&a.out, &csv)?;
    Ok(json!({ "outputs": [a.out], "points": points.len() }))
}

fn cmd_damages(a: &DamagesArgs) -> Result<Value> {
    let mut spec = match &a.scenario {
        Some(p) => read_scenario_damages(p)?,
        None => DamageSpec::default(),
    };
    if let Some(v) = a.scc {
        spec.scc = v;
    }
    if let Some(v) = a.base_emissions {
        spec.base_emissions = v;
    }
    if let Some(v) = a.base_gdp {
        spec.base_gdp = v;
    }
    spec.check().map_err(|e| config_err(e.to_string()))?;
    let rows = a
        .delta
        .iter()
        .map(|&d| scc_damages(d, &spec))
        .collect::<milspend_core::Result<Vec<_>>>()?;
    let mut summary = json!({ "spec": spec, "damages": rows });
    if let Some(out) = &a.out {
        write_json(out, &summary)?;
        merge(&mut summary, json!({ "outputs": [out] }));
    }
    Ok(summary)
}

fn read_scenario_damages(path: &Path) -> Result<DamageSpec> {
    if !path.exists() {
        return Err(config_err(format!(
            "file {} does not exist",
            path.display()
        )));
    }
    DamageSpec::from_key_values(&KeyValues::read(path)?).map_err(|e| config_err(e.to_string()))
}

fn cmd_pipeline(a: &PipelineArgs, seed: u64, opts: &SolverOptions) -> Result<Value> {
    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let panel = match &a.panel {
        Some(p) => read_panel(p, a.schema.as_deref())?,
        None => {
            let p = nato_panel(seed)?;
            write_atomic(&out.join("panel.csv"), |path| p.write_csv(path))?;
            p
        }
    };
    let shocks = extract_shocks(&panel, a.var.into(), 2, 2)?;
    write_atomic(&out.join("shocks.csv"), |p| shocks.write_csv(p))?;
    let irf = estimate_lp(
        &panel,
        &shocks,
        Outcome::log(PanelVariable::Emissions),
        &LpSpec::default(),
    )?;
    write_atomic(&out.join("irf.csv"), |p| irf.write_csv(p))?;

    let calib = match &a.calib {
        Some(p) => load_calibration(p)?,
        None => default_calibration(seed)?,
    };
    let (spec, damages) = match &a.scenario {
        Some(p) => read_scenario(p)?,
        None => (
            ScenarioSpec::preset(
                Preset::Baseline,
                1.0,
                milspend_core::scenario::TEMPORARY_RHO,
            ),
            DamageSpec::default(),
        ),
    };
    let report = steady_report(&calib, &spec, &damages, opts)?;
    write_json(&out.join("report.json"), &report)?;
    let path = out.join("path.csv");
    let trans = run_transition(&calib, &spec, a.horizon, opts, &path)?;
    let resolved: ResolvedScenario = report.resolved;
    Ok(json!({
        "outputs": [out.join("shocks.csv"), out.join("irf.csv"), out.join("report.json"), path],
        "countries": shocks.0.len(),
        "irf_peak": irf.beta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "pm": resolved.pm,
        "em": resolved.em,
        "steady_emissions_pct": report.emissions_pct,
        "transition_horizon": trans["horizon"],
    }))
}

const SCENARIOS: [(&str, &str); 5] = [
    (
        "zero_shock.conf",
        "E_pp = 0\npreset = baseline\nrho = permanent\n",
    ),
    (
        "baseline_permanent.conf",
        "E_pp = 1\npreset = baseline\nrho = permanent\n",
    ),
    (
        "baseline_temporary.conf",
        "E_pp = 1\npreset = baseline\nrho = temporary\n",
    ),
    (
        "material_permanent.conf",
        "E_pp = 1\npreset = material\nrho = permanent\nscc = 1367\n",
    ),
    (
        "korean_war.conf",
        "E_pp = korean_war\npreset = baseline\nrho = permanent\n",
    ),
];

fn cmd_fixture(a: &FixtureArgs, seed: u64) -> Result<Value> {
    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let raw = us_like_inputs(seed)?;
    // stage the input directory, then move each file into place
    let stage = tempfile::tempdir_in(out).context("staging directory")?;
    raw.write(stage.path())?;
    let io = out.join("io");
    std::fs::create_dir_all(&io).with_context(|| format!("creating {}", io.display()))?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(stage.path())?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut outputs = Vec::new();
    for p in names {
        let target = io.join(p.file_name().expect("file name"));
        std::fs::rename(&p, &target).with_context(|| format!("moving {}", target.display()))?;
        outputs.push(target);
    }
    let calib = raw.build()?;
    write_json(&out.join("calibration.json"), &calib)?;
    outputs.push(out.join("calibration.json"));
    for (name, panel) in [
        ("panel.csv", nato_panel(seed)?),
        ("panel_intensity.csv", intensity_panel(seed)?),
    ] {
        write_atomic(&out.join(name), |p| panel.write_csv(p))?;
        outputs.push(out.join(name));
    }
    for (name, text) in SCENARIOS {
        write_text(&out.join(name), text)?;
        outputs.push(out.join(name));
    }
    Ok(json!({ "outputs": outputs, "industries": calib.n }))
}
