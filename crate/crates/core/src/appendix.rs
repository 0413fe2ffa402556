//! The partial-measurement Markov process.
//!
//! Only even sites are measured (for `P = 1 - |0⟩⟨0|`) and carry a binary
//! flag `f`; odd sites are never measured and carry the real number
//! `g = Tr(P ρ_j) ∈ [0, 1]`. Every brickwork gate pairs one site of each
//! kind, so a layer updates `(f, g)` pair by pair. After an `M_1` outcome
//! the measured site is reset with probability `p`. The two ways of ending
//! with `f = 0` are merged into a single branch carrying the averaged `g`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::circuit::{check_geometry, layer_pairs, Boundary, Parity};
use crate::Error;

/// Values of `g` below this are flushed to zero.
pub const G_FLOOR: f64 = 1e-300;

/// Outcome probabilities of the `P` measurement and the post-measurement `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branches {
    pub p_m0: f64,
    pub p_m1: f64,
    pub g_m0: f64,
    pub g_m1: f64,
}

pub fn branches(f: bool, g: f64, q: f64) -> Branches {
    let g_m1 = q / (q + 1.0);
    if f {
        Branches { p_m0: 1.0 / (q + 2.0), p_m1: (q + 1.0) / (q + 2.0), g_m0: 1.0, g_m1 }
    } else {
        Branches {
            p_m0: (1.0 - g) + g / (q + 2.0),
            p_m1: (q + 1.0) * g / (q + 2.0),
            g_m0: g / (1.0 + (1.0 - g) * (1.0 + q)),
            g_m1,
        }
    }
}

/// The merged update: with probability `prob_zero` the pair becomes
/// `(0, g_zero)`, otherwise `(1, g_one)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Update {
    pub prob_zero: f64,
    pub g_zero: f64,
    pub g_one: f64,
}

pub fn update(f: bool, g: f64, p: f64, q: f64) -> Update {
    let b = branches(f, g, q);
    let prob_zero = b.p_m0 + p * b.p_m1;
    // p_m0 > 0 for every g in [0, 1], so the merged branch is never empty
    let g_zero = (b.p_m0 * b.g_m0 + p * b.p_m1 * b.g_m1) / prob_zero;
    Update { prob_zero, g_zero, g_one: b.g_m1 }
}

/// Branch-averaged `g` after one update.
pub fn expected_g(f: bool, g: f64, p: f64, q: f64) -> f64 {
    let b = branches(f, g, q);
    let u = update(f, g, p, q);
    // weight of the `f = 1` branch taken directly; `1 - prob_zero` cancels for tiny g
    u.prob_zero * u.g_zero + (1.0 - p) * b.p_m1 * u.g_one
}

/// Per-step contraction `(q+1)/(q+2)` of `g` next to an inactive flag.
pub fn contraction(q: f64) -> f64 {
    (q + 1.0) / (q + 2.0)
}

/// Branch-averaged `g` after `tau` updates with the neighbouring flag held at 0.
pub fn held_mean(g0: f64, tau: usize, p: f64, q: f64) -> f64 {
    (0..tau).fold(g0, |g, _| expected_g(false, g, p, q))
}

/// Even entries are flags (0 or 1), odd entries are `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedFlagRow {
    pub values: Vec<f64>,
}

impl MixedFlagRow {
    pub fn initial(len: usize) -> Self {
        Self { values: vec![1.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flag(&self, j: usize) -> bool {
        debug_assert!(j % 2 == 0);
        self.values[j] != 0.0
    }

    pub fn density(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Fraction of set flags (even sites).
    pub fn flag_density(&self) -> f64 {
        let n = self.values.len().div_ceil(2);
        self.values.iter().step_by(2).sum::<f64>() / n as f64
    }

    /// Mean `g` over the odd sites.
    pub fn mean_g(&self) -> f64 {
        let n = self.values.len() / 2;
        self.values.iter().skip(1).step_by(2).sum::<f64>() / n as f64
    }
}

/// One layer. Whichever member of a pair is even is the measured one.
pub fn appendix_a_step<R: Rng + ?Sized>(row: &mut MixedFlagRow, p: f64, q: f64, parity: Parity, boundary: Boundary, rng: &mut R) {
    let v = &mut row.values;
    for (j, k) in layer_pairs(v.len(), parity, boundary) {
        let (m, u) = if j % 2 == 0 { (j, k) } else { (k, j) };
        let up = update(v[m] != 0.0, v[u], p, q);
        let (f, g) = if rng.random::<f64>() < up.prob_zero { (0.0, up.g_zero) } else { (1.0, up.g_one) };
        v[m] = f;
        v[u] = if g < G_FLOOR { 0.0 } else { g };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppendixParams {
    pub len: usize,
    pub depth: usize,
    pub rate: f64,
    pub q: f64,
    pub boundary: Boundary,
    pub record: bool,
}

impl AppendixParams {
    pub fn validate(&self) -> Result<(), Error> {
        check_geometry(self.len, self.boundary)?;
        if self.len % 2 == 1 {
            return Err(Error::InvalidArgument("the process needs an even number of sites"));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidArgument("rate must lie in [0, 1]"));
        }
        if !(self.q >= 1.0) {
            return Err(Error::InvalidArgument("q must be at least 1"));
        }
        Ok(())
    }
}

/// Gray-level history: row 0 is the initial row.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayRecord {
    pub width: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GrayRecord {
    /// Pixel value, `g` mapped linearly onto `0..=255`.
    pub fn level(&self, t: usize, j: usize) -> u8 {
        libm::round(self.rows[t][j].clamp(0.0, 1.0) * 255.0) as u8
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppendixRun {
    /// Mean of `f` and `g` over all sites, `t = 0..=T`.
    pub density: Vec<f64>,
    /// Mean flag of the measured sites.
    pub flags: Vec<f64>,
    /// Mean `g` of the unmeasured sites.
    pub g_mean: Vec<f64>,
    pub record: Option<GrayRecord>,
}

pub fn run_appendix_a<R: Rng + ?Sized>(params: &AppendixParams, rng: &mut R) -> Result<AppendixRun, Error> {
    params.validate()?;
    let mut row = MixedFlagRow::initial(params.len);
    let mut record = params.record.then(|| GrayRecord { width: params.len, rows: vec![row.values.clone()] });
    let mut density = vec![row.density()];
    let mut flags = vec![row.flag_density()];
    let mut g_mean = vec![row.mean_g()];
    for t in 1..=params.depth {
        appendix_a_step(&mut row, params.rate, params.q, Parity::of_layer(t), params.boundary, rng);
        density.push(row.density());
        flags.push(row.flag_density());
        g_mean.push(row.mean_g());
        if let Some(r) = record.as_mut() {
            r.rows.push(row.values.clone());
        }
    }
    Ok(AppendixRun { density, flags, g_mean, record })
}
