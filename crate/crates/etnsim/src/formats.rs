//! CSV aggregates, binary PGM bitmaps and JSONL manifests.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use etn_core::appendix::GrayRecord;
use etn_core::circuit::SpacetimeRecord;
use serde_json::Value;

use crate::config::{config_from_value, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl FormatError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), message: message.into() }
    }
}

/// One line of the aggregate CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

pub const CSV_HEADER: [&str; 5] = ["t", "observable", "mean", "stderr", "n"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_aggregate_csv<W: Write>(w: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([r.t.to_string(), r.observable.clone(), fmt_float(r.mean), fmt_float(r.stderr), r.n.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>, FormatError> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    parse_aggregate_csv(file, path)
}

pub fn parse_aggregate_csv<R: Read>(input: R, path: &Path) -> Result<Vec<AggregateRow>, FormatError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| FormatError::parse(path, e.to_string()))?.clone();
    for (i, want) in CSV_HEADER.iter().enumerate() {
        if header.get(i) != Some(*want) {
            return Err(FormatError::parse(path, format!("column {} should be {want:?}, found {:?}", i + 1, header.get(i).unwrap_or(""))));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FormatError::parse(path, e.to_string()))?;
        let bad = |col: &str| FormatError::parse(path, format!("row {}: bad {col}", line + 2));
        rows.push(AggregateRow {
            t: rec[0].parse().map_err(|_| bad("t"))?,
            observable: rec[1].to_string(),
            mean: rec[2].parse().map_err(|_| bad("mean"))?,
            stderr: rec[3].parse().map_err(|_| bad("stderr"))?,
            n: rec[4].parse().map_err(|_| bad("n"))?,
        });
    }
    Ok(rows)
}

/// Binary PGM with maxval 255, row-major.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> io::Result<()> {
    assert_eq!(pixels.len(), width * height);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)
}

fn pgm_token<R: BufRead>(r: &mut R) -> io::Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
        } else if c.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(c as char);
        }
    }
}

/// `(width, height, pixels)` of an 8-bit binary PGM.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut r = BufReader::new(file);
    let perr = |m: &str| FormatError::parse(path, m.to_string());
    let magic = pgm_token(&mut r).map_err(|_| perr("truncated header"))?;
    if magic != "P5" {
        return Err(perr("not a binary PGM (P5)"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = pgm_token(&mut r).map_err(|_| perr("truncated header"))?.parse().map_err(|_| perr("bad header field"))?;
    }
    let [width, height, maxval] = dims;
    if maxval != 255 {
        return Err(perr("only maxval 255 is supported"));
    }
    let mut pixels = vec![0u8; width * height];
    r.read_exact(&mut pixels).map_err(|_| perr("fewer pixels than the header promises"))?;
    Ok((width, height, pixels))
}

/// Rows `t = 0..=T` top to bottom; active bonds white.
pub fn record_pixels(rec: &SpacetimeRecord) -> Vec<u8> {
    let mut px = Vec::with_capacity(rec.width() * (rec.depth() + 1));
    for t in 0..=rec.depth() {
        px.extend((0..rec.width()).map(|j| if rec.active(t, j) { 255 } else { 0 }));
    }
    px
}

pub fn gray_pixels(rec: &GrayRecord) -> Vec<u8> {
    let mut px = Vec::with_capacity(rec.width * rec.rows.len());
    for t in 0..rec.rows.len() {
        px.extend((0..rec.width).map(|j| rec.level(t, j)));
    }
    px
}

pub fn write_record_pgm(path: &Path, rec: &SpacetimeRecord) -> Result<(), FormatError> {
    let mut buf = Vec::new();
    write_pgm(&mut buf, rec.width(), rec.depth() + 1, &record_pixels(rec)).expect("in-memory write");
    fs::write(path, buf).map_err(|e| FormatError::io(path, e))
}

/// Pixels above mid-gray count as active.
pub fn read_record_pgm(path: &Path) -> Result<SpacetimeRecord, FormatError> {
    let (w, h, px) = read_pgm(path)?;
    if w == 0 || h == 0 {
        return Err(FormatError::parse(path, "empty image"));
    }
    let row = |t: usize| -> Vec<bool> { px[t * w..(t + 1) * w].iter().map(|&v| v > 127).collect() };
    let rows: Vec<Vec<bool>> = (1..h).map(row).collect();
    Ok(SpacetimeRecord::from_rows(&row(0), &rows))
}

/// The configuration stored in the last line of a run's manifest.
pub fn read_manifest_config(dir: &Path) -> Result<ExperimentConfig, FormatError> {
    let path = dir.join(crate::runner::MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))?;
    let last = text.lines().rev().find(|l| !l.trim().is_empty()).ok_or_else(|| FormatError::parse(&path, "empty manifest"))?;
    let v: Value = serde_json::from_str(last).map_err(|e| FormatError::parse(&path, e.to_string()))?;
    let cfg = v.get("config").ok_or_else(|| FormatError::parse(&path, "no config entry"))?;
    config_from_value(cfg).map_err(|e| FormatError::parse(&path, e.to_string()))
}
