//! Mixed stabilizer states of prime-dimension qudits.
//!
//! Both engines keep a full symplectic basis of F_p^{2L} as `2L` rows, in
//! pairs `(row i, row L+i)` with `<row_{L+i}, row_i> = 1` and every other
//! product zero. The first `g` pairs are (stabilizer, destabilizer); the rest
//! are logical pairs spanning the directions the mixed state is uniform over.
//! Only stabilizer rows carry phases. The extra rows make every measurement
//! case a linear pass over the tableau.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::clifford::CliffordGate;
use crate::field::PrimeField;
use crate::pauli::{product_phase, symplectic, PauliWord};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitKind {
    /// `ρ = I / p^L`, no stabilizers.
    MaximallyMixed,
    /// The product state `|0…0⟩`, stabilized by every `Z_j`.
    AllZero,
}

/// An exact probability `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Operations shared by the generic and the bit-packed qubit engine.
///
/// With phase tracking switched off the engines evolve only the stabilizer
/// group's exponent matrix: entropies stay exact, measurement outcomes are
/// not drawn (they are reported as 0) and `inactive_probability` is
/// unavailable.
pub trait StabilizerState: Clone + Send {
    fn init(field: PrimeField, len: usize, kind: InitKind) -> Result<Self, Error>
    where
        Self: Sized;

    fn field(&self) -> PrimeField;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of stabilizer generators `g`.
    fn rank(&self) -> usize;

    /// Total entropy `L - g` in units of `ln p`.
    fn entropy(&self) -> usize {
        self.len() - self.rank()
    }

    fn set_phase_tracking(&mut self, on: bool);

    fn tracks_phases(&self) -> bool;

    /// Conjugate the state by `gate` acting on `sites` (in gate order).
    fn apply_gate(&mut self, gate: &CliffordGate, sites: &[usize]) -> Result<(), Error> {
        check_sites(self.field(), self.len(), gate, sites)?;
        if sites.len() == 2 {
            self.apply_pair_unchecked(gate, sites[0], sites[1]);
        } else {
            self.apply_local_unchecked(gate, sites);
        }
        Ok(())
    }

    /// Two-qudit gate without validation.
    fn apply_pair_unchecked(&mut self, gate: &CliffordGate, j: usize, k: usize);

    /// Gate of any arity without validation.
    fn apply_local_unchecked(&mut self, gate: &CliffordGate, sites: &[usize]);

    /// Projective measurement of `Z_j`; returns the outcome `a` with the
    /// post-state in `|a⟩` on site `j`. Panics if `j` is out of range.
    fn measure_z<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> u16;

    /// Measure `Z_j` and shift the observed basis state to `|0⟩`.
    fn reset_site<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R);

    /// `Tr(ρ |0⟩⟨0|_j)` without collapsing the state. Panics without phase
    /// tracking.
    fn inactive_probability(&self, j: usize) -> Ratio;

    /// Entropy of the sites in `sites`, in units of `ln p`.
    fn subsystem_entropy(&self, sites: &[usize]) -> usize;

    /// Stabilizer generators in the [`PauliWord`] phase convention.
    fn stabilizers(&self) -> Vec<PauliWord>;

    /// The full symplectic basis: rows `0..L` then their partners `L..2L`.
    /// Phases are reported for stabilizer rows only (zero elsewhere).
    fn basis(&self) -> Vec<PauliWord>;

    /// Symplectic basis relations, stabilizer commutation and, for qubits,
    /// hermiticity of the generators.
    fn check_invariants(&self) -> bool {
        check_symplectic_basis(&self.field(), &self.basis(), self.rank())
    }

    /// One `x | z | phase` line per generator.
    fn dump(&self) -> String {
        let mut s = String::new();
        for w in self.stabilizers() {
            s.push_str(&w.dump());
            s.push('\n');
        }
        s
    }
}

pub(crate) fn check_sites(field: PrimeField, len: usize, gate: &CliffordGate, sites: &[usize]) -> Result<(), Error> {
    if gate.dimension() != field.order() {
        return Err(Error::DimensionMismatch { gate: gate.dimension(), state: field.order() });
    }
    if sites.len() != gate.arity() {
        return Err(Error::InvalidArgument("site count differs from gate arity"));
    }
    for (i, &s) in sites.iter().enumerate() {
        if s >= len {
            return Err(Error::SiteOutOfRange { site: s, len });
        }
        if sites[..i].contains(&s) {
            return Err(Error::SiteCollision(s));
        }
    }
    Ok(())
}

/// Generic engine: row-major `u16` exponents, any supported prime.
#[derive(Clone, Debug)]
pub struct StabilizerTableau {
    field: PrimeField,
    n: usize,
    g: usize,
    /// `2n` rows of `2n` entries, `x` block first.
    rows: Vec<u16>,
    /// Phases of rows `0..n`; only `0..g` are meaningful.
    phases: Vec<u16>,
    track: bool,
    scratch: Vec<u16>,
}

impl StabilizerTableau {
    pub fn new(field: PrimeField, len: usize, kind: InitKind) -> Result<Self, Error> {
        if len == 0 {
            return Err(Error::InvalidArgument("a state needs at least one site"));
        }
        let w = 2 * len;
        let mut rows = vec![0u16; w * w];
        for i in 0..len {
            // (Z_i, X_i) pairs
            rows[i * w + len + i] = 1;
            rows[(len + i) * w + i] = 1;
        }
        let g = match kind {
            InitKind::MaximallyMixed => 0,
            InitKind::AllZero => len,
        };
        Ok(Self { field, n: len, g, rows, phases: vec![0; len], track: true, scratch: vec![0; w] })
    }

    #[inline]
    fn w(&self) -> usize {
        2 * self.n
    }

    fn row(&self, r: usize) -> &[u16] {
        let w = self.w();
        &self.rows[r * w..(r + 1) * w]
    }

    /// Phase exponent of the stabilizer `ω^{-a} Z_j`.
    fn eigen_phase(&self, a: u16) -> u16 {
        let f = &self.field;
        f.phase(-(a as i64) * f.omega_units() as i64)
    }

    fn pivot_stabilizer(&self, j: usize) -> Option<usize> {
        let w = self.w();
        (0..self.g).find(|&i| self.rows[i * w + j] != 0)
    }

    fn logical_pair(&self, j: usize) -> Option<usize> {
        let (n, w) = (self.n, self.w());
        (self.g..n).find(|&i| self.rows[i * w + j] != 0 || self.rows[(n + i) * w + j] != 0)
    }

    /// Phase of `ω^φ Z_j` in the stabilizer group when case (ii) holds.
    fn deterministic_phase(&self, j: usize) -> u16 {
        let (n, w) = (self.n, self.w());
        let f = &self.field;
        let mut acc = vec![0u16; w];
        let mut ph = 0u16;
        for i in 0..self.g {
            let c = self.rows[(n + i) * w + j];
            if c != 0 {
                mul_power_into(&mut acc, &mut ph, self.row(i), self.phases[i], c, f);
            }
        }
        debug_assert!(acc.iter().enumerate().all(|(c, &e)| e == u16::from(c == n + j)));
        ph
    }

    fn outcome_from_phase(&self, ph: u16) -> u16 {
        if self.field.is_qubit() {
            ph / 2
        } else {
            self.field.neg(ph)
        }
    }

    /// Case (i): stabilizer `piv` anticommutes with `Z_j`.
    fn collapse(&mut self, j: usize, piv: usize, a: u16) {
        let (n, w) = (self.n, self.w());
        let f = self.field;
        let p = f.order() as usize;
        let mut pivot = core::mem::take(&mut self.scratch);
        pivot.copy_from_slice(&self.rows[piv * w..(piv + 1) * w]);
        let pivot_phase = self.phases[piv];
        let inv = f.inv(pivot[j]);
        // for small p, all multiples of the pivot up front turn each row
        // update into a modular add
        let table = !f.is_qubit() && p <= w;
        let mut multiples = Vec::new();
        if table {
            multiples = vec![0u16; p * w];
            for k in 1..p {
                let (prev, cur) = multiples.split_at_mut(k * w);
                cur[..w].copy_from_slice(&prev[(k - 1) * w..]);
                f.add_row(&mut cur[..w], &pivot);
            }
        }
        for r in 0..w {
            if r == piv || r == n + piv {
                continue;
            }
            let xr = self.rows[r * w + j];
            if xr == 0 {
                continue;
            }
            let k = f.neg(f.mul(xr, inv));
            let row = &mut self.rows[r * w..(r + 1) * w];
            if r < self.g && self.track {
                mul_power_into(row, &mut self.phases[r], &pivot, pivot_phase, k, &f);
            } else if table {
                let k = k as usize;
                f.add_row(row, &multiples[k * w..(k + 1) * w]);
            } else {
                add_scaled(row, &pivot, k, &f);
            }
        }
        for (d, &s) in self.rows[(n + piv) * w..(n + piv + 1) * w].iter_mut().zip(&pivot) {
            *d = f.mul(s, inv);
        }
        let row = &mut self.rows[piv * w..(piv + 1) * w];
        row.fill(0);
        row[n + j] = 1;
        self.phases[piv] = self.eigen_phase(a);
        self.scratch = pivot;
    }

    /// Case (iii): `Z_j` commutes with the group but has a logical component
    /// in pair `k`; it becomes stabilizer number `g`.
    fn purify(&mut self, j: usize, k: usize, a: u16) {
        let (n, w) = (self.n, self.w());
        let f = self.field;
        let g = self.g;
        if k != g {
            for c in 0..w {
                self.rows.swap(k * w + c, g * w + c);
                self.rows.swap((n + k) * w + c, (n + g) * w + c);
            }
        }
        let src = if self.rows[(n + g) * w + j] != 0 { n + g } else { g };
        let mut partner = core::mem::take(&mut self.scratch);
        let inv = f.inv(self.rows[src * w + j]);
        for (d, &s) in partner.iter_mut().zip(&self.rows[src * w..(src + 1) * w]) {
            *d = f.mul(s, inv);
        }
        for r in (g + 1..n).chain(n..w) {
            if r == n + g {
                continue;
            }
            let xr = self.rows[r * w + j];
            if xr != 0 {
                add_scaled(&mut self.rows[r * w..(r + 1) * w], &partner, f.neg(xr), &f);
            }
        }
        self.rows[(n + g) * w..(n + g + 1) * w].copy_from_slice(&partner);
        let row = &mut self.rows[g * w..(g + 1) * w];
        row.fill(0);
        row[n + j] = 1;
        self.phases[g] = self.eigen_phase(a);
        self.g += 1;
        self.scratch = partner;
    }
}

pub(crate) fn check_symplectic_basis(f: &PrimeField, basis: &[PauliWord], g: usize) -> bool {
    let n = basis.len() / 2;
    for (a, ra) in basis.iter().enumerate() {
        for (b, rb) in basis.iter().enumerate() {
            let want = if a == b + n && b < n {
                1
            } else if b == a + n && a < n {
                f.neg(1)
            } else {
                0
            };
            if ra.symplectic_product(rb, f) != want {
                return false;
            }
        }
    }
    if f.is_qubit() {
        for w in &basis[..g] {
            let ys: u16 = w.x.iter().zip(&w.z).map(|(a, b)| a & b).sum();
            if (w.phase + ys) % 2 != 0 {
                return false;
            }
        }
    }
    true
}

/// `row ← row + k·src` on exponents only.
#[inline]
fn add_scaled(row: &mut [u16], src: &[u16], k: u16, f: &PrimeField) {
    if f.is_qubit() {
        for (a, &b) in row.iter_mut().zip(src) {
            *a ^= b;
        }
    } else {
        f.axpy(row, src, k);
    }
}

/// `acc ← acc · src^k` including the phase.
fn mul_power_into(acc: &mut [u16], ph: &mut u16, src: &[u16], src_ph: u16, k: u16, f: &PrimeField) {
    let n = acc.len() / 2;
    if f.is_qubit() {
        let shift = product_phase(&acc[..n], &acc[n..], &src[..n], &src[n..], f);
        *ph = f.phase_add(f.phase_add(*ph, src_ph), shift);
        for (a, &b) in acc.iter_mut().zip(src) {
            *a ^= b;
        }
        return;
    }
    // D(u) (ω^s D(v))^k = ω^{ks - k<u,v>/2} D(u + kv)
    let s = symplectic(&acc[..n], &acc[n..], &src[..n], &src[n..], f);
    let half = f.half() as u16;
    let delta = f.sub(f.mul(k, src_ph), f.mul(f.mul(k, s), half));
    *ph = f.add(*ph, delta);
    f.axpy(acc, src, k);
}

/// Rank over F_p of a row-major `rows × cols` matrix, destroying it.
/// Pivots are taken in order: lowest column, then lowest row.
pub fn rank_mod_p(m: &mut [u16], rows: usize, cols: usize, f: &PrimeField) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| m[r * cols + c] != 0) else {
            continue;
        };
        if piv != rank {
            for cc in c..cols {
                m.swap(piv * cols + cc, rank * cols + cc);
            }
        }
        let inv = f.inv(m[rank * cols + c]);
        for r in rank + 1..rows {
            let e = m[r * cols + c];
            if e == 0 {
                continue;
            }
            let k = f.neg(f.mul(e, inv));
            for cc in c..cols {
                let v = f.mul(m[rank * cols + cc], k);
                m[r * cols + cc] = f.add(m[r * cols + cc], v);
            }
        }
        rank += 1;
    }
    rank
}

pub(crate) fn site_mask(len: usize, sites: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &s in sites {
        assert!(s < len, "site {s} out of range for {len} sites");
        mask[s] = true;
    }
    mask
}

impl StabilizerState for StabilizerTableau {
    fn init(field: PrimeField, len: usize, kind: InitKind) -> Result<Self, Error> {
        Self::new(field, len, kind)
    }

    fn field(&self) -> PrimeField {
        self.field
    }

    fn len(&self) -> usize {
        self.n
    }

    fn rank(&self) -> usize {
        self.g
    }

    fn set_phase_tracking(&mut self, on: bool) {
        self.track = on;
    }

    fn tracks_phases(&self) -> bool {
        self.track
    }

    fn apply_pair_unchecked(&mut self, gate: &CliffordGate, j: usize, k: usize) {
        let (n, w) = (self.n, self.w());
        let track = self.track;
        let f = self.field;
        for r in 0..w {
            let row = &mut self.rows[r * w..(r + 1) * w];
            let v = [row[j], row[k], row[n + j], row[n + k]];
            if v == [0; 4] {
                continue;
            }
            let (img, delta) = gate.image2(v);
            row[j] = img[0];
            row[k] = img[1];
            row[n + j] = img[2];
            row[n + k] = img[3];
            if track && r < self.g {
                self.phases[r] = f.phase_add(self.phases[r], delta);
            }
        }
    }

    fn apply_local_unchecked(&mut self, gate: &CliffordGate, sites: &[usize]) {
        let (n, w) = (self.n, self.w());
        let a = sites.len();
        let f = self.field;
        let mut v = vec![0u16; 2 * a];
        for r in 0..w {
            let row = &mut self.rows[r * w..(r + 1) * w];
            for (i, &s) in sites.iter().enumerate() {
                v[i] = row[s];
                v[a + i] = row[n + s];
            }
            if v.iter().all(|&e| e == 0) {
                continue;
            }
            let (img, delta) = gate.image(&v);
            for (i, &s) in sites.iter().enumerate() {
                row[s] = img[i];
                row[n + s] = img[a + i];
            }
            if self.track && r < self.g {
                self.phases[r] = f.phase_add(self.phases[r], delta);
            }
        }
    }

    fn measure_z<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> u16 {
        assert!(j < self.n, "site {j} out of range for {} sites", self.n);
        let p = self.field.order();
        if let Some(piv) = self.pivot_stabilizer(j) {
            let a = if self.track { rng.random_range(0..p) as u16 } else { 0 };
            self.collapse(j, piv, a);
            return a;
        }
        if let Some(k) = self.logical_pair(j) {
            let a = if self.track { rng.random_range(0..p) as u16 } else { 0 };
            self.purify(j, k, a);
            return a;
        }
        if !self.track {
            return 0;
        }
        self.outcome_from_phase(self.deterministic_phase(j))
    }

    fn reset_site<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        let a = self.measure_z(j, rng);
        if !self.track || a == 0 {
            return;
        }
        // conjugation by X^{-a}: Z_j ↦ ω^a Z_j
        let (n, w) = (self.n, self.w());
        let f = self.field;
        for i in 0..self.g {
            let z = self.rows[i * w + n + j];
            if z != 0 {
                let shift = f.mul(a, z) as i64 * f.omega_units() as i64;
                self.phases[i] = f.phase_add(self.phases[i], f.phase(shift));
            }
        }
    }

    fn inactive_probability(&self, j: usize) -> Ratio {
        assert!(j < self.n, "site {j} out of range for {} sites", self.n);
        assert!(self.track, "inactive_probability needs phase tracking");
        if self.pivot_stabilizer(j).is_some() || self.logical_pair(j).is_some() {
            return Ratio { num: 1, den: self.field.order() };
        }
        if self.outcome_from_phase(self.deterministic_phase(j)) == 0 {
            Ratio::ONE
        } else {
            Ratio::ZERO
        }
    }

    fn subsystem_entropy(&self, sites: &[usize]) -> usize {
        let n = self.n;
        let mask = site_mask(n, sites);
        let size_a = mask.iter().filter(|&&b| b).count();
        let comp: Vec<usize> = (0..n).filter(|&c| !mask[c]).collect();
        let cols = 2 * comp.len();
        if self.g == 0 {
            return size_a;
        }
        let mut m = Vec::with_capacity(self.g * cols);
        for i in 0..self.g {
            let r = self.row(i);
            m.extend(comp.iter().map(|&c| r[c]));
            m.extend(comp.iter().map(|&c| r[n + c]));
        }
        let rank = rank_mod_p(&mut m, self.g, cols, &self.field);
        size_a + rank - self.g
    }

    fn stabilizers(&self) -> Vec<PauliWord> {
        let mut b = self.basis();
        b.truncate(self.g);
        b
    }

    fn basis(&self) -> Vec<PauliWord> {
        let n = self.n;
        (0..2 * n)
            .map(|i| {
                let r = self.row(i);
                let phase = if i < self.g { self.phases[i] } else { 0 };
                PauliWord { x: r[..n].to_vec(), z: r[n..].to_vec(), phase }
            })
            .collect()
    }
}
