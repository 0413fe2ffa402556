//! Experiment configuration: strict JSON parsing with every violation
//! reported against its key path.

use std::fmt;

use etn_core::circuit::{check_geometry, Boundary};
use etn_core::field::{is_prime, MAX_DIMENSION};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    CliffordFlagged,
    DpStandard,
    DpHaar,
    AppendixA,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::CliffordFlagged, Model::DpStandard, Model::DpHaar, Model::AppendixA];

    pub fn name(self) -> &'static str {
        match self {
            Model::CliffordFlagged => "clifford_flagged",
            Model::DpStandard => "dp_standard",
            Model::DpHaar => "dp_haar",
            Model::AppendixA => "appendix_a",
        }
    }

    fn supports(self, o: Observable) -> bool {
        use Observable::*;
        match self {
            Model::CliffordFlagged => true,
            Model::DpStandard | Model::DpHaar => matches!(o, NClassical | SpacetimeRecord | MinCut | RedBonds),
            Model::AppendixA => matches!(o, NClassical | NQuantum | SpacetimeRecord),
        }
    }

    fn default_observables(self) -> Vec<Observable> {
        match self {
            Model::CliffordFlagged => vec![Observable::NClassical, Observable::EntropyQ],
            _ => vec![Observable::NClassical],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Maximally mixed start.
    Purification,
    /// `|0…0⟩` start.
    SteadyState,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Purification => "purification",
            Protocol::SteadyState => "steady_state",
        }
    }
}

/// Observables in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    NQuantum,
    NClassical,
    EntropyQ,
    EntropyIntervals,
    SpacetimeRecord,
    MinCut,
    RedBonds,
}

impl Observable {
    pub const ALL: [Observable; 7] = [
        Observable::NQuantum,
        Observable::NClassical,
        Observable::EntropyQ,
        Observable::EntropyIntervals,
        Observable::SpacetimeRecord,
        Observable::MinCut,
        Observable::RedBonds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::NQuantum => "n_quantum",
            Observable::NClassical => "n_classical",
            Observable::EntropyQ => "entropy_Q",
            Observable::EntropyIntervals => "entropy_intervals",
            Observable::SpacetimeRecord => "spacetime_record",
            Observable::MinCut => "min_cut",
            Observable::RedBonds => "red_bonds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }
}

pub fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::Open => "open",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    /// Local dimension `q + 1`; absent for standard DP.
    pub q_plus_1: Option<u64>,
    pub len: usize,
    pub depth: usize,
    pub rate: f64,
    pub protocol: Protocol,
    pub boundary: Boundary,
    pub n_samples: u64,
    pub master_seed: u64,
    /// Sorted, without duplicates.
    pub observables: Vec<Observable>,
    /// `(start, length)` of the final-state intervals.
    pub intervals: Vec<(usize, usize)>,
    pub per_trajectory: bool,
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn wants(&self, o: Observable) -> bool {
        self.observables.contains(&o)
    }

    /// `q` of the reduced processes.
    pub fn q(&self) -> Option<u64> {
        self.q_plus_1.map(|d| d - 1)
    }

    /// Canonical JSON: every field explicit, keys sorted.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("model".into(), json!(self.model.name()));
        if let Some(d) = self.q_plus_1 {
            m.insert("q_plus_1".into(), json!(d));
        }
        m.insert("L".into(), json!(self.len));
        m.insert("T".into(), json!(self.depth));
        m.insert("p".into(), json!(self.rate));
        m.insert("protocol".into(), json!(self.protocol.name()));
        m.insert("boundary".into(), json!(boundary_name(self.boundary)));
        m.insert("n_samples".into(), json!(self.n_samples));
        m.insert("master_seed".into(), json!(self.master_seed));
        m.insert("observables".into(), json!(self.observables.iter().map(|o| o.name()).collect::<Vec<_>>()));
        if self.wants(Observable::EntropyIntervals) {
            m.insert("intervals".into(), json!(self.intervals.iter().map(|&(s, l)| [s, l]).collect::<Vec<_>>()));
        }
        m.insert("per_trajectory".into(), json!(self.per_trajectory));
        m.insert("output_path".into(), json!(self.output_path));
        Value::Object(m)
    }

    /// SHA-256 of the canonical JSON without the output path.
    pub fn hash(&self) -> String {
        let mut v = self.to_json();
        v.as_object_mut().expect("object").remove("output_path");
        hex(&Sha256::digest(v.to_string().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn single(path: &str, message: impl Into<String>) -> Self {
        Self { violations: vec![Violation { path: path.into(), message: message.into() }] }
    }

    pub fn mentions(&self, path: &str) -> bool {
        self.violations.iter().any(|v| v.path == path)
    }
}

const KEYS: [&str; 14] = [
    "model",
    "q_plus_1",
    "q",
    "L",
    "T",
    "p",
    "protocol",
    "boundary",
    "n_samples",
    "master_seed",
    "observables",
    "intervals",
    "per_trajectory",
    "output_path",
];

struct Checker<'a> {
    obj: &'a Map<String, Value>,
    errors: Vec<Violation>,
}

impl<'a> Checker<'a> {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Violation { path: path.into(), message: message.into() });
    }

    fn get(&mut self, key: &str, required: bool) -> Option<&'a Value> {
        let v = self.obj.get(key);
        if v.is_none() && required {
            self.fail(key, "missing required key");
        }
        v
    }

    fn uint(&mut self, key: &str, required: bool) -> Option<u64> {
        let v = self.get(key, required)?;
        match v.as_u64() {
            Some(n) => Some(n),
            None => {
                self.fail(key, format!("expected a non-negative integer, found {v}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str, required: bool) -> Option<&'a str> {
        let v = self.get(key, required)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.fail(key, format!("expected a string, found {v}"));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, required: bool, options: &[(&str, T)]) -> Option<T> {
        let s = self.string(key, required)?;
        match options.iter().find(|o| o.0 == s) {
            Some(o) => Some(o.1),
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                self.fail(key, format!("unknown value {s:?}, expected one of {}", names.join(", ")));
                None
            }
        }
    }
}

/// Parse and validate a configuration, collecting all violations.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::single("$", format!("invalid JSON: {e}")))?;
    config_from_value(&value)
}

pub fn config_from_value(value: &Value) -> Result<ExperimentConfig, ConfigError> {
    let Some(obj) = value.as_object() else {
        return Err(ConfigError::single("$", "expected a JSON object"));
    };
    let mut c = Checker { obj, errors: Vec::new() };
    for key in obj.keys() {
        if !KEYS.contains(&key.as_str()) {
            c.fail(key.as_str(), "unknown key");
        }
    }

    let models: Vec<(&str, Model)> = Model::ALL.iter().map(|&m| (m.name(), m)).collect();
    let model = c.choice("model", true, &models);
    let protocol = c
        .choice("protocol", false, &[("purification", Protocol::Purification), ("steady_state", Protocol::SteadyState)])
        .unwrap_or(Protocol::Purification);
    let boundary =
        c.choice("boundary", false, &[("periodic", Boundary::Periodic), ("open", Boundary::Open)]).unwrap_or(Boundary::Periodic);

    let len = c.uint("L", true);
    let depth = c.uint("T", true);
    let n_samples = c.uint("n_samples", true);
    let master_seed = c.uint("master_seed", true);
    if let Some(l) = len {
        if l < 2 {
            c.fail("L", "must be at least 2");
        } else if check_geometry(l as usize, boundary).is_err() {
            c.fail("L", "periodic boundaries need an even number of sites");
        } else if model == Some(Model::AppendixA) && l % 2 == 1 {
            c.fail("L", "appendix_a needs an even number of sites");
        }
    }
    if depth == Some(0) {
        c.fail("T", "must be at least 1");
    }
    if n_samples == Some(0) {
        c.fail("n_samples", "must be at least 1");
    }

    let rate = match c.get("p", true) {
        Some(v) => match v.as_f64() {
            Some(p) if (0.0..=1.0).contains(&p) => Some(p),
            Some(p) => {
                c.fail("p", format!("must lie in [0, 1], found {p}"));
                None
            }
            None => {
                c.fail("p", format!("expected a number, found {v}"));
                None
            }
        },
        None => None,
    };

    let dim = c.uint("q_plus_1", false);
    let q = c.uint("q", false);
    let q_plus_1 = match model {
        Some(Model::CliffordFlagged) => {
            if q.is_some() {
                c.fail("q", "clifford_flagged takes q_plus_1");
            }
            match dim {
                None if !obj.contains_key("q_plus_1") => {
                    c.fail("q_plus_1", "missing required key");
                    None
                }
                Some(d) if d > u64::from(MAX_DIMENSION) => {
                    c.fail("q_plus_1", format!("must not exceed {MAX_DIMENSION}"));
                    None
                }
                Some(d) if !is_prime(d as u32) => {
                    c.fail("q_plus_1", "q_plus_1 must be prime");
                    None
                }
                d => d,
            }
        }
        Some(Model::DpHaar | Model::AppendixA) => match (dim, q) {
            (Some(_), Some(_)) => {
                c.fail("q", "give either q or q_plus_1, not both");
                None
            }
            (Some(d), None) if d < 2 => {
                c.fail("q_plus_1", "must be at least 2");
                None
            }
            (None, Some(0)) => {
                c.fail("q", "must be at least 1");
                None
            }
            (Some(d), None) => Some(d),
            (None, Some(q)) => Some(q + 1),
            (None, None) => {
                if !obj.contains_key("q") && !obj.contains_key("q_plus_1") {
                    c.fail("q", "missing required key (q or q_plus_1)");
                }
                None
            }
        },
        Some(Model::DpStandard) => {
            for key in ["q", "q_plus_1"] {
                if obj.contains_key(key) {
                    c.fail(key, "dp_standard has no local dimension");
                }
            }
            None
        }
        None => None,
    };

    let mut observables = Vec::new();
    match c.get("observables", false) {
        None => {
            if let Some(m) = model {
                observables = m.default_observables();
            }
        }
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let path = format!("observables[{i}]");
                match item.as_str().map(Observable::parse) {
                    Some(Some(o)) => {
                        if model.is_some_and(|m| !m.supports(o)) {
                            c.fail(path, format!("{} is not available for {}", o.name(), model.unwrap().name()));
                        } else {
                            observables.push(o);
                        }
                    }
                    Some(None) => c.fail(path, format!("unknown observable {item}")),
                    None => c.fail(path, format!("expected a string, found {item}")),
                }
            }
        }
        Some(v) => c.fail("observables", format!("expected an array, found {v}")),
    }
    observables.sort_unstable();
    observables.dedup();

    let mut intervals = Vec::new();
    match c.get("intervals", false) {
        None => {
            if let Some(l) = len {
                intervals = (1..=l as usize / 2).map(|x| (0, x)).collect();
            }
        }
        Some(Value::Array(items)) => {
            if !observables.contains(&Observable::EntropyIntervals) {
                c.fail("intervals", "only used with the entropy_intervals observable");
            }
            for (i, item) in items.iter().enumerate() {
                let path = format!("intervals[{i}]");
                let pair = item.as_array().filter(|a| a.len() == 2).and_then(|a| Some((a[0].as_u64()?, a[1].as_u64()?)));
                match (pair, len) {
                    (None, _) => c.fail(path, format!("expected [start, length], found {item}")),
                    (Some((s, l)), Some(n)) if s >= n || l == 0 || l > n => {
                        c.fail(path, format!("interval [{s}, {l}] does not fit in {n} sites"))
                    }
                    (Some((s, l)), _) => intervals.push((s as usize, l as usize)),
                }
            }
        }
        Some(v) => c.fail("intervals", format!("expected an array, found {v}")),
    }

    let per_trajectory = match c.get("per_trajectory", false) {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => {
            c.fail("per_trajectory", format!("expected a boolean, found {v}"));
            false
        }
    };
    let output_path = c.string("output_path", false).unwrap_or("etnsim-out").to_string();

    if !c.errors.is_empty() {
        return Err(ConfigError { violations: c.errors });
    }
    Ok(ExperimentConfig {
        model: model.expect("checked"),
        q_plus_1,
        len: len.expect("checked") as usize,
        depth: depth.expect("checked") as usize,
        rate: rate.expect("checked"),
        protocol,
        boundary,
        n_samples: n_samples.expect("checked"),
        master_seed: master_seed.expect("checked"),
        observables,
        intervals,
        per_trajectory,
        output_path,
    })
}
