//! Stored runs as scaling datasets.

use std::path::{Path, PathBuf};

use etn_core::scaling::{Curve, Point, ScalingDataset};

use crate::formats::{read_aggregate_csv, read_manifest_config, AggregateRow, FormatError};

/// Points of one observable, ordered by `t`.
pub fn points_of(rows: &[AggregateRow], observable: &str) -> Vec<Point> {
    let mut pts: Vec<Point> = rows
        .iter()
        .filter(|r| r.observable == observable)
        .map(|r| Point { t: r.t as f64, value: r.mean, stderr: r.stderr, n: r.n })
        .collect();
    pts.sort_by(|a, b| a.t.total_cmp(&b.t));
    pts
}

fn run_dir(csv: &Path) -> PathBuf {
    match csv.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// One curve per aggregate CSV; size, rate and dimension come from the
/// manifest stored next to each file.
pub fn load_dataset(csvs: &[PathBuf], observable: &str) -> Result<ScalingDataset, FormatError> {
    let mut curves = Vec::new();
    let mut meta: Option<(u32, String)> = None;
    for csv in csvs {
        let cfg = read_manifest_config(&run_dir(csv))?;
        let rows = read_aggregate_csv(csv)?;
        let points = points_of(&rows, observable);
        if points.is_empty() {
            return Err(FormatError::parse(csv, format!("no rows for observable {observable:?}")));
        }
        let this = (cfg.q_plus_1.unwrap_or(2) as u32, cfg.protocol.name().to_string());
        match &meta {
            Some(m) if *m != this => return Err(FormatError::parse(csv, "runs mix local dimensions or protocols")),
            _ => meta = Some(this),
        }
        curves.push(Curve { len: cfg.len, rate: cfg.rate, points });
    }
    let (q_plus_1, protocol) = meta.ok_or_else(|| FormatError::parse(Path::new("-"), "no input files"))?;
    ScalingDataset::new(observable, q_plus_1, &protocol, curves).map_err(|e| FormatError::parse(&csvs[0], e.to_string()))
}
