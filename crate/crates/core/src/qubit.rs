//! Bit-packed stabilizer engine for qubits.
//!
//! Same symplectic-basis layout and algorithm as [`StabilizerTableau`], stored
//! column-major: for every qubit an `x` and a `z` bit column over all `2L`
//! rows, plus one sign bit per row. Rows follow the Hermitian convention
//! `(-1)^s ⊗ σ(x, z)` with `σ(1, 1) = Y = iXZ`; exported words convert to the
//! bare `i^phase X^x Z^z` convention of [`PauliWord`].
//!
//! Rows `0..L` live in words `0..wn` and rows `L..2L` in words `wn..2wn`, so
//! row `i` and its partner `L + i` sit at the same bit of corresponding words.
//!
//! [`StabilizerTableau`]: crate::StabilizerTableau

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::clifford::CliffordGate;
use crate::field::PrimeField;
use crate::pauli::PauliWord;
use crate::tableau::{site_mask, InitKind, Ratio, StabilizerState};
use crate::Error;

#[derive(Clone, Debug)]
pub struct QubitTableau {
    n: usize,
    g: usize,
    wn: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    sign: Vec<u64>,
    track: bool,
}

#[inline]
fn parity_prefix_exclusive(w: u64) -> u64 {
    let mut y = w;
    y ^= y << 1;
    y ^= y << 2;
    y ^= y << 4;
    y ^= y << 8;
    y ^= y << 16;
    y ^= y << 32;
    y ^ w
}

/// Low `bits` bits set, clipped to one word.
#[inline]
fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        !0
    } else {
        (1u64 << bits) - 1
    }
}

impl QubitTableau {
    pub fn new(len: usize, kind: InitKind) -> Result<Self, Error> {
        if len == 0 {
            return Err(Error::InvalidArgument("a state needs at least one site"));
        }
        let wn = len.div_ceil(64);
        let cw = 2 * wn;
        let mut t = Self {
            n: len,
            g: match kind {
                InitKind::MaximallyMixed => 0,
                InitKind::AllZero => len,
            },
            wn,
            x: vec![0; len * cw],
            z: vec![0; len * cw],
            sign: vec![0; cw],
            track: true,
        };
        for i in 0..len {
            // row i = Z_i, row L+i = X_i
            t.z[i * cw + i / 64] |= 1 << (i % 64);
            t.x[i * cw + wn + i / 64] |= 1 << (i % 64);
        }
        Ok(t)
    }

    #[inline]
    fn cw(&self) -> usize {
        2 * self.wn
    }

    #[inline]
    fn loc(&self, r: usize) -> (usize, u64) {
        if r < self.n {
            (r / 64, 1 << (r % 64))
        } else {
            let i = r - self.n;
            (self.wn + i / 64, 1 << (i % 64))
        }
    }

    #[inline]
    fn xbit(&self, c: usize, r: usize) -> bool {
        let (w, b) = self.loc(r);
        self.x[c * self.cw() + w] & b != 0
    }

    #[inline]
    fn zbit(&self, c: usize, r: usize) -> bool {
        let (w, b) = self.loc(r);
        self.z[c * self.cw() + w] & b != 0
    }

    fn set_row_bit(v: &mut [u64], w: usize, b: u64, on: bool) {
        if on {
            v[w] |= b;
        } else {
            v[w] &= !b;
        }
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        let (w1, b1) = self.loc(r1);
        let (w2, b2) = self.loc(r2);
        let cw = self.cw();
        for col in [&mut self.x, &mut self.z] {
            for c in 0..self.n {
                let base = c * cw;
                let v1 = col[base + w1] & b1 != 0;
                let v2 = col[base + w2] & b2 != 0;
                if v1 != v2 {
                    col[base + w1] ^= b1;
                    col[base + w2] ^= b2;
                }
            }
        }
        let v1 = self.sign[w1] & b1 != 0;
        let v2 = self.sign[w2] & b2 != 0;
        if v1 != v2 {
            self.sign[w1] ^= b1;
            self.sign[w2] ^= b2;
        }
    }

    /// Copy row `src` into row `dst` (exponents only).
    fn copy_row(&mut self, src: usize, dst: usize) {
        let (ws, bs) = self.loc(src);
        let (wd, bd) = self.loc(dst);
        let cw = self.cw();
        for col in [&mut self.x, &mut self.z] {
            for c in 0..self.n {
                let on = col[c * cw + ws] & bs != 0;
                Self::set_row_bit(&mut col[c * cw..(c + 1) * cw], wd, bd, on);
            }
        }
    }

    /// Make row `r` equal to `Z_j` with sign `s`.
    fn set_row_to_z(&mut self, r: usize, j: usize, s: bool) {
        let (w, b) = self.loc(r);
        let cw = self.cw();
        for c in 0..self.n {
            self.x[c * cw + w] &= !b;
            Self::set_row_bit(&mut self.z[c * cw..(c + 1) * cw], w, b, c == j);
        }
        Self::set_row_bit(&mut self.sign, w, b, s);
    }

    fn stab_mask(&self, w: usize) -> u64 {
        low_mask(self.g.saturating_sub(w * 64))
    }

    fn pivot_stabilizer(&self, j: usize) -> Option<usize> {
        let col = &self.x[j * self.cw()..];
        for w in 0..self.g.div_ceil(64) {
            let m = col[w] & self.stab_mask(w);
            if m != 0 {
                return Some(w * 64 + m.trailing_zeros() as usize);
            }
        }
        None
    }

    fn logical_pair(&self, j: usize) -> Option<usize> {
        let col = &self.x[j * self.cw()..];
        let live = low_mask(self.n % 64);
        for w in 0..self.wn {
            let top = if w + 1 == self.wn && self.n % 64 != 0 { live } else { !0 };
            let m = (col[w] | col[self.wn + w]) & !self.stab_mask(w) & top;
            if m != 0 {
                return Some(w * 64 + m.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Bare phase of the product of stabilizers equal to `±Z_j` (case ii).
    fn deterministic_phase(&self, j: usize) -> u32 {
        let (cw, wn) = (self.cw(), self.wn);
        let sel: Vec<u64> = (0..wn).map(|w| self.x[j * cw + wn + w] & self.stab_mask(w)).collect();
        let mut total = 2 * sel.iter().zip(&self.sign).map(|(s, g)| (s & g).count_ones()).sum::<u32>();
        let mut cross = 0u32;
        for c in 0..self.n {
            let xs = &self.x[c * cw..c * cw + wn];
            let zs = &self.z[c * cw..c * cw + wn];
            let mut carry = 0u64;
            for w in 0..wn {
                let xw = xs[w] & sel[w];
                let zw = zs[w] & sel[w];
                total += (xw & zw).count_ones();
                let before = parity_prefix_exclusive(zw) ^ carry;
                cross += (xw & before).count_ones();
                if zw.count_ones() % 2 == 1 {
                    carry = !carry;
                }
            }
        }
        (total + 2 * cross) % 4
    }

    fn collapse(&mut self, j: usize, piv: usize, a: bool) {
        let (cw, wn) = (self.cw(), self.wn);
        let mut m: Vec<u64> = self.x[j * cw..(j + 1) * cw].to_vec();
        let (pw, pb) = self.loc(piv);
        m[pw] &= !pb;
        m[wn + pw] &= !pb;
        let support: Vec<(usize, bool, bool)> = (0..self.n)
            .filter_map(|c| {
                let (xp, zp) = (self.xbit(c, piv), self.zbit(c, piv));
                (xp || zp).then_some((c, xp, zp))
            })
            .collect();
        if self.track {
            let sp = if self.sign[pw] & pb != 0 { !0u64 } else { 0 };
            let words = self.g.div_ceil(64);
            let mut c0 = vec![0u64; words];
            let mut c1 = vec![0u64; words];
            let mut mp = vec![0u64; words];
            for &(c, xp, zp) in &support {
                let xs = &self.x[c * cw..];
                let zs = &self.z[c * cw..];
                for w in 0..words {
                    if m[w] == 0 {
                        continue;
                    }
                    let (xw, zw) = (xs[w], zs[w]);
                    let (anti, minus) = match (xp, zp) {
                        (true, false) => (zw, !xw & zw),
                        (true, true) => (xw ^ zw, xw & !zw),
                        _ => (xw, xw & zw),
                    };
                    c1[w] ^= c0[w] & anti;
                    c0[w] ^= anti;
                    mp[w] ^= minus;
                }
            }
            for w in 0..words {
                self.sign[w] ^= (c1[w] ^ mp[w] ^ sp) & m[w] & self.stab_mask(w);
            }
        }
        for &(c, xp, zp) in &support {
            if xp {
                for (d, &s) in self.x[c * cw..(c + 1) * cw].iter_mut().zip(&m) {
                    *d ^= s;
                }
            }
            if zp {
                for (d, &s) in self.z[c * cw..(c + 1) * cw].iter_mut().zip(&m) {
                    *d ^= s;
                }
            }
        }
        self.copy_row(piv, self.n + piv);
        self.set_row_to_z(piv, j, a);
    }

    fn purify(&mut self, j: usize, k: usize, a: bool) {
        let (n, g, cw, wn) = (self.n, self.g, self.cw(), self.wn);
        if k != g {
            self.swap_rows(k, g);
            self.swap_rows(n + k, n + g);
        }
        let src = if self.xbit(j, n + g) { n + g } else { g };
        let mut m: Vec<u64> = self.x[j * cw..(j + 1) * cw].to_vec();
        // rows g+1..n and n..2n, except n+g
        for w in 0..wn {
            m[w] &= !low_mask((g + 1).saturating_sub(w * 64));
        }
        let (gw, gb) = self.loc(g);
        m[wn + gw] &= !gb;
        for c in 0..n {
            if self.xbit(c, src) {
                for (d, &s) in self.x[c * cw..(c + 1) * cw].iter_mut().zip(&m) {
                    *d ^= s;
                }
            }
            if self.zbit(c, src) {
                for (d, &s) in self.z[c * cw..(c + 1) * cw].iter_mut().zip(&m) {
                    *d ^= s;
                }
            }
        }
        if src != n + g {
            self.copy_row(src, n + g);
        }
        self.set_row_to_z(g, j, a);
        self.g += 1;
    }

    fn apply_columns(&mut self, gate: &CliffordGate, sites: &[usize]) {
        let a = sites.len();
        debug_assert!(a <= 2);
        let d = 2 * a;
        let anf = if self.track { gate.sign_anf() } else { 0 };
        // output column r is the XOR of the input columns in sources[r]
        let m = gate.symplectic_matrix();
        let mut sources = [0u8; 4];
        for (r, src) in sources.iter_mut().enumerate().take(d) {
            for c in 0..d {
                if m[r * d + c] != 0 {
                    *src |= 1 << c;
                }
            }
        }
        let cw = self.cw();
        let mut input = [0u64; 4];
        for w in 0..cw {
            for (i, &s) in sites.iter().enumerate() {
                input[i] = self.x[s * cw + w];
                input[a + i] = self.z[s * cw + w];
            }
            if input[..d].iter().all(|&v| v == 0) {
                continue;
            }
            let mut output = [0u64; 4];
            for (o, &src) in output.iter_mut().zip(&sources).take(d) {
                for (c, &v) in input.iter().enumerate().take(d) {
                    if src >> c & 1 == 1 {
                        *o ^= v;
                    }
                }
            }
            if anf != 0 {
                let mut flip = 0u64;
                let mut rest = anf;
                while rest != 0 {
                    let s = rest.trailing_zeros();
                    rest &= rest - 1;
                    let mut term = !0u64;
                    for (i, &v) in input.iter().enumerate().take(d) {
                        if s >> i & 1 == 1 {
                            term &= v;
                        }
                    }
                    flip ^= term;
                }
                self.sign[w] ^= flip;
            }
            for (i, &s) in sites.iter().enumerate() {
                self.x[s * cw + w] = output[i];
                self.z[s * cw + w] = output[a + i];
            }
        }
    }

    fn row_word(&self, r: usize) -> PauliWord {
        let x: Vec<u16> = (0..self.n).map(|c| u16::from(self.xbit(c, r))).collect();
        let z: Vec<u16> = (0..self.n).map(|c| u16::from(self.zbit(c, r))).collect();
        let (w, b) = self.loc(r);
        let ys: u16 = x.iter().zip(&z).map(|(a, b)| a & b).sum();
        let s = u16::from(self.sign[w] & b != 0);
        PauliWord { x, z, phase: (2 * s + ys) % 4 }
    }
}

impl StabilizerState for QubitTableau {
    fn init(field: PrimeField, len: usize, kind: InitKind) -> Result<Self, Error> {
        if !field.is_qubit() {
            return Err(Error::DimensionMismatch { gate: 2, state: field.order() });
        }
        Self::new(len, kind)
    }

    fn field(&self) -> PrimeField {
        PrimeField::new(2).expect("2 is prime")
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
        self.apply_columns(gate, &[j, k]);
    }

    fn apply_local_unchecked(&mut self, gate: &CliffordGate, sites: &[usize]) {
        self.apply_columns(gate, sites);
    }

    fn measure_z<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> u16 {
        assert!(j < self.n, "site {j} out of range for {} sites", self.n);
        if let Some(piv) = self.pivot_stabilizer(j) {
            let a = self.track && rng.random_range(0..2u32) == 1;
            self.collapse(j, piv, a);
            return u16::from(a);
        }
        if let Some(k) = self.logical_pair(j) {
            let a = self.track && rng.random_range(0..2u32) == 1;
            self.purify(j, k, a);
            return u16::from(a);
        }
        if !self.track {
            return 0;
        }
        (self.deterministic_phase(j) / 2) as u16
    }

    fn reset_site<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        if self.measure_z(j, rng) == 1 && self.track {
            let cw = self.cw();
            for w in 0..self.wn {
                self.sign[w] ^= self.z[j * cw + w] & self.stab_mask(w);
            }
        }
    }

    fn inactive_probability(&self, j: usize) -> Ratio {
        assert!(j < self.n, "site {j} out of range for {} sites", self.n);
        assert!(self.track, "inactive_probability needs phase tracking");
        if self.pivot_stabilizer(j).is_some() || self.logical_pair(j).is_some() {
            return Ratio { num: 1, den: 2 };
        }
        if self.deterministic_phase(j) == 0 {
            Ratio::ONE
        } else {
            Ratio::ZERO
        }
    }

    fn subsystem_entropy(&self, sites: &[usize]) -> usize {
        let mask = site_mask(self.n, sites);
        let size_a = mask.iter().filter(|&&b| b).count();
        if self.g == 0 {
            return size_a;
        }
        let cw = self.cw();
        let words = self.g.div_ceil(64);
        // column rank of the stabilizer rows restricted to the complement
        let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
        let mut v = vec![0u64; words];
        for c in (0..self.n).filter(|&c| !mask[c]) {
            for col in [&self.x, &self.z] {
                for w in 0..words {
                    v[w] = col[c * cw + w] & self.stab_mask(w);
                }
                for (pivot, b) in &basis {
                    if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                        for (a, bb) in v.iter_mut().zip(b) {
                            *a ^= bb;
                        }
                    }
                }
                // every basis vector is zero at the pivots before its own
                if let Some(w) = (0..words).find(|&w| v[w] != 0) {
                    let pivot = w * 64 + v[w].trailing_zeros() as usize;
                    basis.push((pivot, v.clone()));
                    if basis.len() == self.g {
                        return size_a;
                    }
                }
            }
        }
        size_a + basis.len() - self.g
    }

    fn stabilizers(&self) -> Vec<PauliWord> {
        (0..self.g).map(|r| self.row_word(r)).collect()
    }

    fn basis(&self) -> Vec<PauliWord> {
        (0..2 * self.n)
            .map(|r| {
                let mut w = self.row_word(r);
                if r >= self.g {
                    w.phase = 0;
                }
                w
            })
            .collect()
    }
}
