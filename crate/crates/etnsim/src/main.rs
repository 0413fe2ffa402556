use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use etn_core::circuit::Boundary;
use etn_core::etn::build_etn;
use etn_core::scaling::{
    collapse_quality, cross_section_at_eta, fit_conformal, fit_line, fit_power_law, fit_steady_state, rescale_dp,
    rescale_entropy_dp, rescale_time, CollapseCurve, ConformalReference, ExponentSet, RescaledCurve, CONFORMAL_WINDOW,
};
use etnsim::analysis::{load_dataset, points_of};
use etnsim::config::{config_from_value, ConfigError, ExperimentConfig, Model, Observable};
use etnsim::formats::{fmt_float, read_aggregate_csv, read_manifest_config, read_record_pgm, write_pgm, FormatError};
use etnsim::runner::{run_experiment, run_one, workers_from_env, RunError};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "etnsim", version, about = "Adaptive monitored circuits, directed percolation and their scaling analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard or Haar-channel bond directed percolation.
    DpRun(RunArgs),
    /// The flagged adaptive Clifford circuit.
    CliffordRun(RunArgs),
    /// The partial-measurement process.
    AppendixaRun(RunArgs),
    /// Min-cut and red bonds of stored spacetime records.
    EtnAnalyze(EtnArgs),
    /// Rescale stored curves and report the collapse quality.
    Collapse(CollapseArgs),
    /// Fit a scaling law to stored curves.
    Fit(FitArgs),
    /// Write the spacetime bitmap of one trajectory.
    RenderConfig(RenderArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "q-plus-1")]
    q_plus_1: Option<u64>,
    #[arg(long)]
    length: Option<u64>,
    #[arg(long)]
    depth: Option<u64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    boundary: Option<String>,
    /// Comma-separated observable names.
    #[arg(long, value_delimiter = ',')]
    observables: Option<Vec<String>>,
    /// Also write per-trajectory rows.
    #[arg(long)]
    per_trajectory: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtnWhat {
    MinCut,
    RedBonds,
    Both,
}

#[derive(Args)]
struct EtnArgs {
    /// Spacetime record (binary PGM).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    what: EtnWhat,
    #[arg(long, default_value = "periodic")]
    boundary: String,
    /// Only the full record, not every prefix.
    #[arg(long)]
    final_only: bool,
    /// CSV destination; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rescaling {
    /// `y = L^{zα} n` against `t L^{-z}`.
    Dp,
    /// `S / ln(q+1)` against `t L^{-z}`.
    Entropy,
    /// `S` against `t L^{-a}` with `--time-exponent`.
    Time,
}

#[derive(Args)]
struct CollapseArgs {
    /// Aggregate CSVs, one curve each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "n_classical")]
    observable: String,
    #[arg(long, value_enum, default_value = "dp")]
    rescaling: Rescaling,
    /// `dp` or `custom` (then give the exponents).
    #[arg(long, default_value = "dp")]
    exponents: String,
    #[arg(long)]
    pc: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu_perp: Option<f64>,
    #[arg(long)]
    nu_par: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    time_exponent: f64,
    /// Collapse the cross section at this `η` across rates instead.
    #[arg(long)]
    eta: Option<f64>,
    /// Drop points with `t` below this.
    #[arg(long, default_value_t = 1.0)]
    tmin: f64,
    #[arg(long)]
    tmax: Option<f64>,
    /// Rescaled curves as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Power,
    Line,
    SteadyState,
    Conformal,
}

#[derive(Args)]
struct FitArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    law: Law,
    /// Abscissa; only `t` is stored.
    #[arg(long, default_value = "t")]
    x: String,
    /// Observable; `n` is short for `n_classical`.
    #[arg(long, default_value = "n_classical")]
    y: String,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Conformal fits: known `h_{a|b}`.
    #[arg(long)]
    h: Option<f64>,
    /// Conformal fits: known velocity.
    #[arg(long)]
    velocity: Option<f64>,
    #[arg(long, default_value_t = CONFORMAL_WINDOW.0)]
    tau_min: f64,
    #[arg(long, default_value_t = CONFORMAL_WINDOW.1)]
    tau_max: f64,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Trajectory index.
    #[arg(long, default_value_t = 0)]
    index: u64,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => {
                Failure::Config(format!("missing input: {e}"))
            }
            FormatError::Parse { .. } => Failure::Config(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Workers(_) => Failure::Config(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<etn_core::Error> for Failure {
    fn from(e: etn_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DpRun(a) => run(a, &[Model::DpStandard, Model::DpHaar]),
        Command::CliffordRun(a) => run(a, &[Model::CliffordFlagged]),
        Command::AppendixaRun(a) => run(a, &[Model::AppendixA]),
        Command::EtnAnalyze(a) => etn_analyze(a),
        Command::Collapse(a) => collapse(a),
        Command::Fit(a) => fit(a),
        Command::RenderConfig(a) => render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error:\n{m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("runtime failure: {m}");
            ExitCode::from(3)
        }
    }
}

/// Config file merged with the flags; the subcommand fixes the model family.
fn build_config(a: &RunArgs, models: &[Model]) -> Result<ExperimentConfig, Failure> {
    let mut obj = match &a.config {
        None => Map::new(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("missing input: {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Failure::Config(format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(Failure::Config(format!("{}: invalid JSON: {e}", path.display()))),
            }
        }
    };
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.to_string(), v);
        }
    };
    set("model", a.model.clone().map(Value::from));
    set("q_plus_1", a.q_plus_1.map(Value::from));
    set("L", a.length.map(Value::from));
    set("T", a.depth.map(Value::from));
    set("p", a.rate.map(Value::from));
    set("n_samples", a.samples.map(Value::from));
    set("master_seed", a.seed.map(Value::from));
    set("protocol", a.protocol.clone().map(Value::from));
    set("boundary", a.boundary.clone().map(Value::from));
    set("observables", a.observables.clone().map(Value::from));
    set("output_path", a.out.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
    if a.per_trajectory {
        obj.insert("per_trajectory".into(), Value::Bool(true));
    }
    if !obj.contains_key("model") {
        obj.insert("model".into(), Value::from(models[0].name()));
    }
    let cfg = config_from_value(&Value::Object(obj))?;
    if !models.contains(&cfg.model) {
        let names: Vec<&str> = models.iter().map(|m| m.name()).collect();
        return Err(ConfigError::single("model", format!("this subcommand runs {}", names.join(" or "))).into());
    }
    Ok(cfg)
}

fn run(a: RunArgs, models: &[Model]) -> Result<(), Failure> {
    let cfg = build_config(&a, models)?;
    let workers = workers_from_env()?;
    let manifest = run_experiment(&cfg, workers)?;
    emit(&manifest.to_json(&cfg).to_string());
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let mut args = a.run.clone();
    args.observables = Some(vec![Observable::SpacetimeRecord.name().to_string()]);
    let models = [Model::CliffordFlagged, Model::DpStandard, Model::DpHaar, Model::AppendixA];
    let out = args.out.take().ok_or_else(|| Failure::Config("out: missing destination for the bitmap".into()))?;
    if args.samples.is_none() {
        args.samples = Some(a.index + 1);
    }
    let cfg = build_config(&args, &models)?;
    if a.index >= cfg.n_samples {
        return Err(Failure::Config("index: must be below n_samples".into()));
    }
    let tr = run_one(&cfg, a.index)?;
    let img = tr.image.expect("spacetime record requested");
    let mut buf = Vec::new();
    write_pgm(&mut buf, img.width, img.height, &img.pixels).expect("in-memory write");
    fs::write(&out, buf).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn parse_boundary(s: &str) -> Result<Boundary, Failure> {
    match s {
        "periodic" => Ok(Boundary::Periodic),
        "open" => Ok(Boundary::Open),
        _ => Err(Failure::Config(format!("boundary: unknown value {s:?}, expected periodic or open"))),
    }
}

fn output(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(|e| Failure::Runtime(e.to_string())),
    }
}

/// A closed pipe downstream is not an error worth reporting.
fn emit(line: &str) {
    let _ = writeln!(io::stdout(), "{line}");
}

fn etn_analyze(a: EtnArgs) -> Result<(), Failure> {
    let boundary = parse_boundary(&a.boundary)?;
    let rec = read_record_pgm(&a.input)?;
    let (cut, red) = match a.what {
        EtnWhat::MinCut => (true, false),
        EtnWhat::RedBonds => (false, true),
        EtnWhat::Both => (true, true),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t"];
    if cut {
        header.push("min_cut");
    }
    if red {
        header.push("n_red");
    }
    let csv_err = |e: csv::Error| Failure::Runtime(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let first = if a.final_only { rec.depth() } else { 0 };
    for t in first..=rec.depth() {
        let g = build_etn(&rec.truncated(t), boundary);
        let mut row = vec![t.to_string()];
        if cut {
            row.push(g.min_cut().value.to_string());
        }
        if red {
            row.push(g.red_bonds().count.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    output(&a.out, &bytes)
}

fn exponent_set(a: &CollapseArgs) -> Result<ExponentSet, Failure> {
    let base = match a.exponents.as_str() {
        "dp" => ExponentSet::dp(),
        "custom" => ExponentSet::new(
            a.alpha.map(Into::into),
            a.nu_perp.map(Into::into),
            a.nu_par.map(Into::into),
            a.z.map(Into::into),
            None,
        )?,
        other => return Err(Failure::Config(format!("exponents: unknown set {other:?}, expected dp or custom"))),
    };
    Ok(match a.pc {
        Some(pc) => base.with_p_c(pc),
        None => base,
    })
}

fn collapse(a: CollapseArgs) -> Result<(), Failure> {
    let mut d = load_dataset(&a.inputs, &a.observable)?;
    let tmax = a.tmax.unwrap_or(f64::INFINITY);
    for c in &mut d.curves {
        c.points.retain(|p| p.t >= a.tmin && p.t <= tmax);
    }
    let exps = exponent_set(&a)?;
    let curves: Vec<RescaledCurve> = match a.rescaling {
        Rescaling::Dp => rescale_dp(&d, &exps)?,
        Rescaling::Entropy => rescale_entropy_dp(&d, &exps)?,
        Rescaling::Time => rescale_time(&d, a.time_exponent)?,
    };
    let collapse: Vec<CollapseCurve> = match a.eta {
        Some(eta) => cross_section_at_eta(&curves, eta).into_iter().map(|(_, c)| c).collect(),
        None => curves.iter().map(CollapseCurve::from).collect(),
    };
    let quality = collapse_quality(&collapse)?;
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Failure::Runtime(e.to_string());
        w.write_record(["L", "p", "x", "eta", "y", "stderr"]).map_err(csv_err)?;
        for c in &curves {
            for &(eta, y, s) in &c.points {
                w.write_record([c.len.to_string(), fmt_float(c.rate), fmt_float(c.x), fmt_float(eta), fmt_float(y), fmt_float(s)])
                    .map_err(csv_err)?;
            }
        }
        output(&Some(out.clone()), &w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?)?;
    }
    emit(&json!({ "quality": quality, "curves": collapse.len() }).to_string());
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    if a.x != "t" {
        return Err(Failure::Config(format!("x: only t is stored, found {:?}", a.x)));
    }
    let y = if a.y == "n" { "n_classical".to_string() } else { a.y.clone() };
    let report = match a.law {
        Law::Power | Law::Line => {
            let [input] = a.inputs.as_slice() else {
                return Err(Failure::Config("inputs: power and line fits take one CSV".into()));
            };
            let rows = read_aggregate_csv(input)?;
            let (lo, hi) = (a.tmin.unwrap_or(1.0), a.tmax.unwrap_or(f64::INFINITY));
            let mut pts: Vec<(f64, f64, f64)> =
                points_of(&rows, &y).into_iter().filter(|p| p.t >= lo && p.t <= hi).map(|p| (p.t, p.value, p.stderr)).collect();
            if pts.iter().any(|p| p.2 == 0.0) {
                for p in &mut pts {
                    p.2 = 0.0;
                }
            }
            if matches!(a.law, Law::Power) {
                pts.retain(|p| p.1 > 0.0);
                let f = fit_power_law(&pts)?;
                json!({"law": "power", "exponent": f.exponent, "exponent_err": f.exponent_err, "amplitude": f.amplitude,
                       "amplitude_err": f.amplitude_err, "chi2": f.chi2, "points": pts.len()})
            } else {
                let f = fit_line(&pts)?;
                json!({"law": "line", "slope": f.slope, "slope_err": f.slope_err, "intercept": f.intercept,
                       "intercept_err": f.intercept_err, "chi2": f.chi2, "points": pts.len()})
            }
        }
        Law::SteadyState => {
            let [input] = a.inputs.as_slice() else {
                return Err(Failure::Config("inputs: steady-state fits take one CSV".into()));
            };
            let cfg = read_manifest_config(input.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
            let rows = read_aggregate_csv(input)?;
            // stored in qudit units, fitted in nats
            let nats = (cfg.q_plus_1.unwrap_or(2) as f64).ln();
            let pts: Vec<(f64, f64, f64)> =
                points_of(&rows, "entropy_interval").into_iter().map(|p| (p.t, p.value * nats, p.stderr * nats)).collect();
            let f = fit_steady_state(cfg.len, &pts)?;
            let excluded = rows.iter().find(|r| r.observable == "final_pure").map(|r| (1.0 - r.mean) * r.n as f64).unwrap_or(0.0);
            json!({"law": "steady_state", "h_ab": f.h_ab, "h_err": f.h_err, "intercept": f.intercept, "chi2": f.chi2,
                   "excluded": excluded.round() as u64})
        }
        Law::Conformal => {
            let reference = match (a.h, a.velocity) {
                (Some(h), None) => ConformalReference::Exponent(h),
                (None, Some(v)) => ConformalReference::Velocity(v),
                _ => return Err(Failure::Config("h, velocity: give exactly one".into())),
            };
            let d = load_dataset(&a.inputs, &y)?;
            let f = fit_conformal(&d, reference, (a.tau_min, a.tau_max))?;
            json!({"law": "conformal", "h_ab": f.h_ab, "v": f.v, "amplitude": f.amplitude, "amplitude_err": f.amplitude_err,
                   "intercept": f.intercept, "quality": f.quality})
        }
    };
    emit(&report.to_string());
    Ok(())
}
