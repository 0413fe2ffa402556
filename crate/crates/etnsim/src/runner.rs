//! Seeded parallel ensembles and their persisted outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use etn_core::appendix::{run_appendix_a, AppendixParams};
use etn_core::circuit::{run_trajectory as run_circuit, CircuitParams, Observables};
use etn_core::dp::{run_dp, DpParams, PairDistribution};
use etn_core::etn::{min_cut_series, red_bonds};
use etn_core::seed::trajectory_seed;
use etn_core::{InitKind, PrimeField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig, Model, Observable, Protocol};
use crate::formats::{fmt_float, gray_pixels, record_pixels, write_aggregate_csv, write_pgm, AggregateRow, FormatError};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SPACETIME_DIR: &str = "spacetime";
/// Worker count override.
pub const WORKERS_ENV: &str = "ETNSIM_WORKERS";

/// Names of the CSV rows in output order. `entropy_interval` rows carry the
/// interval length in the `t` column; `final_pure` and `red_bonds` are
/// reported at `t = T`.
pub const ROW_NAMES: [&str; 7] = ["n_quantum", "n_classical", "entropy_Q", "entropy_interval", "final_pure", "min_cut", "red_bonds"];

fn row_rank(name: &str) -> usize {
    ROW_NAMES.iter().position(|&n| n == name).expect("known row name")
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("trajectory {index} (seed {seed:#018x}) failed: {source}")]
    Trajectory { index: u64, seed: u64, source: etn_core::Error },
    #[error(transparent)]
    Output(#[from] FormatError),
    #[error("{WORKERS_ENV}: {0}")]
    Workers(String),
}

/// Bitmap of a trajectory's spacetime history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub index: u64,
    pub seed: u64,
    /// `(row name, t, value)`.
    pub rows: Vec<(&'static str, u64, f64)>,
    pub image: Option<Image>,
}

impl Trajectory {
    /// Values of one row name ordered by `t`.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.0 == name).map(|r| r.2).collect()
    }
}

fn push_series(rows: &mut Vec<(&'static str, u64, f64)>, name: &'static str, values: &[f64]) {
    rows.extend(values.iter().enumerate().map(|(t, &v)| (name, t as u64, v)));
}

/// One trajectory of the configured model, seeded from the master seed and
/// the trajectory index.
pub fn run_one(cfg: &ExperimentConfig, index: u64) -> Result<Trajectory, RunError> {
    let seed = trajectory_seed(cfg.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fail = |source| RunError::Trajectory { index, seed, source };
    let wants_record = cfg.wants(Observable::SpacetimeRecord) || cfg.wants(Observable::MinCut) || cfg.wants(Observable::RedBonds);
    let mut rows = Vec::new();
    let mut image = None;
    let mut record = None;
    match cfg.model {
        Model::CliffordFlagged => {
            let field = PrimeField::new(cfg.q_plus_1.expect("validated") as u32).map_err(fail)?;
            let params = CircuitParams {
                field,
                len: cfg.len,
                depth: cfg.depth,
                rate: cfg.rate,
                boundary: cfg.boundary,
                init: match cfg.protocol {
                    Protocol::Purification => InitKind::MaximallyMixed,
                    Protocol::SteadyState => InitKind::AllZero,
                },
                observables: Observables {
                    n_quantum: cfg.wants(Observable::NQuantum),
                    n_classical: cfg.wants(Observable::NClassical),
                    entropy: cfg.wants(Observable::EntropyQ),
                    intervals: if cfg.wants(Observable::EntropyIntervals) { cfg.intervals.clone() } else { Vec::new() },
                    spacetime: wants_record,
                },
            };
            let rec = run_circuit(&params, &mut rng).map_err(fail)?;
            push_series(&mut rows, "n_quantum", &rec.n_quantum);
            push_series(&mut rows, "n_classical", &rec.n_classical);
            push_series(&mut rows, "entropy_Q", &rec.entropy);
            if cfg.wants(Observable::EntropyIntervals) {
                // mixed final states have no meaningful bipartite entropy
                if rec.final_pure {
                    rows.extend(rec.intervals.iter().map(|&(_, l, s)| ("entropy_interval", l as u64, s as f64)));
                }
                rows.push(("final_pure", cfg.depth as u64, if rec.final_pure { 1.0 } else { 0.0 }));
            }
            record = rec.spacetime;
        }
        Model::DpStandard | Model::DpHaar => {
            let dist = match cfg.model {
                Model::DpStandard => PairDistribution::standard(cfg.rate),
                _ => PairDistribution::haar(cfg.rate, cfg.q().expect("validated")),
            }
            .map_err(fail)?;
            let params = DpParams { len: cfg.len, depth: cfg.depth, boundary: cfg.boundary, dist, record: wants_record };
            let run = run_dp(&params, &mut rng).map_err(fail)?;
            if cfg.wants(Observable::NClassical) {
                push_series(&mut rows, "n_classical", &run.density);
            }
            record = run.spacetime;
        }
        Model::AppendixA => {
            let params = AppendixParams {
                len: cfg.len,
                depth: cfg.depth,
                rate: cfg.rate,
                q: cfg.q().expect("validated") as f64,
                boundary: cfg.boundary,
                record: cfg.wants(Observable::SpacetimeRecord),
            };
            let run = run_appendix_a(&params, &mut rng).map_err(fail)?;
            if cfg.wants(Observable::NQuantum) {
                push_series(&mut rows, "n_quantum", &run.g_mean);
            }
            if cfg.wants(Observable::NClassical) {
                push_series(&mut rows, "n_classical", &run.flags);
            }
            image = run.record.map(|r| Image { width: r.width, height: r.rows.len(), pixels: gray_pixels(&r) });
        }
    }
    if let Some(rec) = record {
        if cfg.wants(Observable::MinCut) {
            let cuts: Vec<f64> = min_cut_series(&rec, cfg.boundary).into_iter().map(|c| c as f64).collect();
            push_series(&mut rows, "min_cut", &cuts);
        }
        if cfg.wants(Observable::RedBonds) {
            rows.push(("red_bonds", cfg.depth as u64, red_bonds(&rec, cfg.boundary).count as f64));
        }
        if cfg.wants(Observable::SpacetimeRecord) {
            image = Some(Image { width: rec.width(), height: rec.depth() + 1, pixels: record_pixels(&rec) });
        }
    }
    Ok(Trajectory { index, seed, rows, image })
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>, RunError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(RunError::Workers(format!("expected a positive integer, found {s:?}"))),
        },
    }
}

/// All trajectories, in index order whatever the scheduling.
pub fn simulate(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<Trajectory>, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Workers(e.to_string()))?;
    let results: Vec<Result<Trajectory, RunError>> =
        pool.install(|| (0..cfg.n_samples).into_par_iter().map(|i| run_one(cfg, i)).collect());
    results.into_iter().collect()
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

/// Mean and standard error per `(row name, t)`, merged in index order.
pub fn aggregate(trajectories: &[Trajectory]) -> Vec<AggregateRow> {
    let mut acc: BTreeMap<(usize, u64), Welford> = BTreeMap::new();
    for tr in trajectories {
        for &(name, t, v) in &tr.rows {
            acc.entry((row_rank(name), t)).or_default().push(v);
        }
    }
    acc.into_iter()
        .map(|((rank, t), w)| AggregateRow { t, observable: ROW_NAMES[rank].to_string(), mean: w.mean, stderr: w.stderr(), n: w.n })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputFile>,
    /// `None` on success.
    pub error: Option<String>,
}

impl RunManifest {
    pub fn to_json(&self, cfg: &ExperimentConfig) -> Value {
        json!({
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "config": cfg.to_json(),
            "seeds": self.seeds,
            "wall_clock_s": self.wall_clock_s,
            "status": if self.error.is_some() { "failed" } else { "ok" },
            "error": self.error,
            "outputs": self.outputs.iter().map(|o| json!({"path": o.path, "bytes": o.bytes, "sha256": o.sha256})).collect::<Vec<_>>(),
        })
    }
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<OutputFile>,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), FormatError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| FormatError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| FormatError::io(&path, e))?;
        self.outputs.push(OutputFile { path: rel.to_string(), bytes: bytes.len() as u64, sha256: hex(&Sha256::digest(bytes)) });
        Ok(())
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("in-memory CSV");
    buf
}

fn write_outputs(cfg: &ExperimentConfig, trajectories: &[Trajectory], w: &mut Writer<'_>) -> Result<(), FormatError> {
    let rows = aggregate(trajectories);
    w.write(AGGREGATE_FILE, &csv_bytes(|b| write_aggregate_csv(b, &rows)))?;
    if cfg.per_trajectory {
        let bytes = csv_bytes(|b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["trajectory", "seed", "t", "observable", "value"])?;
            for tr in trajectories {
                for &(name, t, v) in &tr.rows {
                    out.write_record([tr.index.to_string(), tr.seed.to_string(), t.to_string(), name.to_string(), fmt_float(v)])?;
                }
            }
            out.flush()?;
            Ok(())
        });
        w.write(TRAJECTORY_FILE, &bytes)?;
    }
    for tr in trajectories {
        if let Some(img) = &tr.image {
            let mut buf = Vec::new();
            write_pgm(&mut buf, img.width, img.height, &img.pixels).expect("in-memory write");
            w.write(&format!("{SPACETIME_DIR}/{:06}.pgm", tr.index), &buf)?;
        }
    }
    Ok(())
}

fn append_manifest(dir: &Path, line: &Value) -> Result<(), FormatError> {
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(|e| FormatError::io(&path, e))?;
    writeln!(f, "{line}").map_err(|e| FormatError::io(&path, e))
}

/// Run the ensemble and write the aggregate CSV, optional per-trajectory
/// rows and bitmaps, and one manifest line under `cfg.output_path`.
/// Failures after the directory exists still leave a manifest line listing
/// the partial outputs.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let dir = PathBuf::from(&cfg.output_path);
    fs::create_dir_all(&dir).map_err(|e| FormatError::io(&dir, e))?;
    let mut manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: (0..cfg.n_samples).map(|i| trajectory_seed(cfg.master_seed, i)).collect(),
        wall_clock_s: 0.0,
        outputs: Vec::new(),
        error: None,
    };
    let mut writer = Writer { dir: &dir, outputs: Vec::new() };
    let result = simulate(cfg, workers).and_then(|trs| write_outputs(cfg, &trs, &mut writer).map_err(RunError::from));
    manifest.outputs = writer.outputs;
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
    }
    append_manifest(&dir, &manifest.to_json(cfg))?;
    result.map(|_| manifest)
}
