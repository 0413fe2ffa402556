//! Clifford gates in tableau form and uniform two-qudit sampling.
//!
//! A gate on `a` qudits is a symplectic matrix `M` over F_p acting on local
//! exponent vectors ordered `(x_0 … x_{a-1}, z_0 … z_{a-1})`, together with
//! the phase of the image of every basis vector. Column `c` of `M` is the
//! exponent vector of the image of basis word `c`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::field::PrimeField;
use crate::pauli::PauliWord;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordGate {
    field: PrimeField,
    arity: usize,
    /// Row-major `(2a) × (2a)`.
    matrix: Vec<u16>,
    phases: Vec<u16>,
    /// Qubits only: for every local pattern `v` (bit `i` = entry `i`), the
    /// packed image pattern and the bare phase picked up.
    table: Vec<(u16, u8)>,
}

impl CliffordGate {
    /// Build a gate from its symplectic matrix and basis-image phases.
    pub fn new(field: PrimeField, arity: usize, matrix: Vec<u16>, phases: Vec<u16>) -> Result<Self, Error> {
        let d = 2 * arity;
        if matrix.len() != d * d || phases.len() != d {
            return Err(Error::InvalidGate("matrix or phase vector has the wrong size"));
        }
        let p = field.order() as u16;
        if matrix.iter().any(|&e| e >= p) || phases.iter().any(|&ph| ph as u32 >= field.phase_modulus()) {
            return Err(Error::InvalidGate("entries must be reduced"));
        }
        let gate = Self { field, arity, matrix, phases, table: Vec::new() };
        if !gate.is_symplectic() {
            return Err(Error::InvalidGate("matrix is not symplectic"));
        }
        if field.is_qubit() {
            for c in 0..d {
                let col = gate.column(c);
                let ys: u32 = (0..arity).map(|s| (col[s] & col[arity + s]) as u32).sum();
                if (gate.phases[c] as u32 + ys) % 2 != 0 {
                    return Err(Error::InvalidGate("qubit basis images must be Hermitian"));
                }
            }
        }
        Ok(Self::from_parts(field, arity, gate.matrix, gate.phases))
    }

    /// Trusted constructor for data that is valid by construction.
    fn from_parts(field: PrimeField, arity: usize, matrix: Vec<u16>, phases: Vec<u16>) -> Self {
        let mut gate = Self { field, arity, matrix, phases, table: Vec::new() };
        if field.is_qubit() {
            gate.build_table();
        }
        gate
    }

    pub fn identity(field: PrimeField, arity: usize) -> Self {
        let d = 2 * arity;
        let mut m = vec![0u16; d * d];
        for i in 0..d {
            m[i * d + i] = 1;
        }
        Self::new(field, arity, m, vec![0; d]).expect("identity is symplectic")
    }

    /// The two-qudit SUM gate `|a, b⟩ ↦ |a, a + b⟩` (CNOT for qubits) with
    /// site 0 as control.
    pub fn sum(field: PrimeField) -> Self {
        let one = 1u16;
        let m1 = field.neg(1);
        // columns: x0 -> x0 + x1, x1 -> x1, z0 -> z0, z1 -> z1 - z0
        #[rustfmt::skip]
        let m = vec![
            one, 0, 0, 0,
            one, one, 0, 0,
            0, 0, one, m1,
            0, 0, 0, one,
        ];
        Self::new(field, 2, m, vec![0; 4]).expect("SUM is symplectic")
    }

    /// Single-qudit Fourier gate: `X ↦ Z`, `Z ↦ X^{-1}` (Hadamard for qubits).
    pub fn fourier(field: PrimeField) -> Self {
        let m = vec![0, field.neg(1), 1, 0];
        Self::new(field, 1, m, vec![0; 2]).expect("Fourier is symplectic")
    }

    /// Conjugation by the Pauli word `D(u)`: `D(v) ↦ ω^{-<u,v>} D(v)`.
    pub fn pauli(field: PrimeField, u: &PauliWord) -> Self {
        let a = u.len();
        let d = 2 * a;
        let mut m = vec![0u16; d * d];
        for i in 0..d {
            m[i * d + i] = 1;
        }
        let phases = (0..d)
            .map(|i| {
                let e = if i < a { PauliWord::x_at(a, i) } else { PauliWord::z_at(a, i - a) };
                let s = u.symplectic_product(&e, &field);
                let units = field.omega_units() as i64;
                field.phase(-(s as i64) * units)
            })
            .collect();
        Self::new(field, a, m, phases).expect("Pauli conjugation is symplectic")
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn dimension(&self) -> u32 {
        self.field.order()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn symplectic_matrix(&self) -> &[u16] {
        &self.matrix
    }

    pub fn phase_function(&self) -> &[u16] {
        &self.phases
    }

    fn column(&self, c: usize) -> Vec<u16> {
        let d = 2 * self.arity;
        (0..d).map(|r| self.matrix[r * d + c]).collect()
    }

    /// Checks `MᵀJM ≡ J` with `J = [[0, I], [-I, 0]]`.
    pub fn is_symplectic(&self) -> bool {
        let d = 2 * self.arity;
        let cols: Vec<Vec<u16>> = (0..d).map(|c| self.column(c)).collect();
        for i in 0..d {
            for j in 0..d {
                let got = local_symplectic(&cols[i], &cols[j], &self.field);
                let want = standard_form(i, j, self.arity, &self.field);
                if got != want {
                    return false;
                }
            }
        }
        true
    }

    /// Image of a local word under conjugation `U w U†`.
    pub fn conjugate(&self, word: &PauliWord) -> PauliWord {
        assert_eq!(word.len(), self.arity, "word acts on the wrong number of qudits");
        let mut v = Vec::with_capacity(2 * self.arity);
        v.extend_from_slice(&word.x);
        v.extend_from_slice(&word.z);
        let (img, delta) = self.image(&v);
        PauliWord {
            x: img[..self.arity].to_vec(),
            z: img[self.arity..].to_vec(),
            phase: self.field.phase_add(word.phase, delta),
        }
    }

    /// Image exponent vector and phase shift of a bare local vector.
    pub fn image(&self, v: &[u16]) -> (Vec<u16>, u16) {
        let d = 2 * self.arity;
        if self.field.is_qubit() {
            let pattern = v.iter().enumerate().fold(0usize, |acc, (i, &e)| acc | ((e as usize & 1) << i));
            let (img, delta) = self.table[pattern];
            ((0..d).map(|i| (img >> i) & 1).collect(), delta as u16)
        } else {
            let f = &self.field;
            let mut out = vec![0u16; d];
            let mut phase = 0u16;
            for c in 0..d {
                if v[c] == 0 {
                    continue;
                }
                phase = f.add(phase, f.mul(self.phases[c], v[c]));
                for r in 0..d {
                    out[r] = f.add(out[r], f.mul(self.matrix[r * d + c], v[c]));
                }
            }
            (out, phase)
        }
    }

    /// Two-qudit fast path used by the tableau engines.
    #[inline]
    pub(crate) fn image2(&self, v: [u16; 4]) -> ([u16; 4], u16) {
        debug_assert_eq!(self.arity, 2);
        if self.field.is_qubit() {
            let pattern = (v[0] | (v[1] << 1) | (v[2] << 2) | (v[3] << 3)) as usize;
            let (img, delta) = self.table[pattern];
            ([img & 1, (img >> 1) & 1, (img >> 2) & 1, (img >> 3) & 1], delta as u16)
        } else {
            let p = self.field.order();
            let m = &self.matrix;
            let mut out = [0u16; 4];
            for (r, o) in out.iter_mut().enumerate() {
                let s = m[r * 4] as u32 * v[0] as u32
                    + m[r * 4 + 1] as u32 * v[1] as u32
                    + m[r * 4 + 2] as u32 * v[2] as u32
                    + m[r * 4 + 3] as u32 * v[3] as u32;
                *o = (s % p) as u16;
            }
            let ph = &self.phases;
            let s = ph[0] as u32 * v[0] as u32
                + ph[1] as u32 * v[1] as u32
                + ph[2] as u32 * v[2] as u32
                + ph[3] as u32 * v[3] as u32;
            (out, (s % p) as u16)
        }
    }

    /// Qubits only: the sign flip picked up by a row in the Hermitian
    /// convention `i^{x·z} X^x Z^z`, as a function of the row's local pattern,
    /// in algebraic normal form. Bit `S` set means the monomial `∏_{i∈S} v_i`
    /// is present.
    pub(crate) fn sign_anf(&self) -> u16 {
        debug_assert!(self.field.is_qubit() && self.arity <= 2);
        let a = self.arity;
        let ys = |pat: u16| -> u32 { ((pat & (pat >> a)) & ((1 << a) - 1)).count_ones() };
        let mut anf = 0u16;
        for (v, &(img, delta)) in self.table.iter().enumerate() {
            // U D(v) U† = i^{w(v) + δ(v) - w(Mv)} D(Mv)
            let e = (ys(v as u16) + delta as u32 + 4 - ys(img)) % 4;
            debug_assert!(e % 2 == 0);
            if e == 2 {
                anf |= 1 << v;
            }
        }
        for i in 0..2 * a {
            for v in 0..self.table.len() {
                if v >> i & 1 == 1 && anf >> (v ^ (1 << i)) & 1 == 1 {
                    anf ^= 1 << v;
                }
            }
        }
        anf
    }

    pub fn inverse(&self) -> Self {
        let d = 2 * self.arity;
        let f = &self.field;
        let inv = invert_matrix(&self.matrix, d, f).expect("symplectic matrices are invertible");
        let phases = if f.is_qubit() {
            (0..d)
                .map(|i| {
                    let v: Vec<u16> = (0..d).map(|r| inv[r * d + i]).collect();
                    let (_, delta) = self.image(&v);
                    ((4 - delta as u32) % 4) as u16
                })
                .collect()
        } else {
            (0..d)
                .map(|i| {
                    let mut s = 0u16;
                    for r in 0..d {
                        s = f.add(s, f.mul(self.phases[r], inv[r * d + i]));
                    }
                    f.neg(s)
                })
                .collect()
        };
        Self::new(*f, self.arity, inv, phases).expect("inverse of a valid gate is valid")
    }

    /// Draw a gate uniformly from the two-qudit Clifford group modulo global
    /// phases: a uniform element of Sp(4, p) paired with a uniform Pauli
    /// translate. The symplectic part is built basis pair by basis pair.
    pub fn sample_two_qudit<R: Rng + ?Sized>(field: PrimeField, rng: &mut R) -> Self {
        let f = &field;
        let p = f.order();
        let mut draw = |rng: &mut R| -> [u16; 4] { core::array::from_fn(|_| rng.random_range(0..p) as u16) };
        let sym = |u: &[u16; 4], v: &[u16; 4]| local_symplectic(u, v, f);

        let e1 = loop {
            let v = draw(rng);
            if v.iter().any(|&e| e != 0) {
                break v;
            }
        };
        let f1 = partner(&e1, &mut draw, rng, f, |v| v);
        // symplectic complement of span{e1, f1}
        let project = |u: [u16; 4]| -> [u16; 4] {
            let a = sym(&u, &f1);
            let b = sym(&u, &e1);
            core::array::from_fn(|i| f.add(f.sub(u[i], f.mul(a, e1[i])), f.mul(b, f1[i])))
        };
        let e2 = loop {
            let v = project(draw(rng));
            if v.iter().any(|&e| e != 0) {
                break v;
            }
        };
        let f2 = partner(&e2, &mut draw, rng, f, project);

        // columns: x0 = e1, x1 = e2, z0 = f1, z1 = f2
        let cols = [e1, e2, f1, f2];
        let mut m = vec![0u16; 16];
        for (c, col) in cols.iter().enumerate() {
            for r in 0..4 {
                m[r * 4 + c] = col[r];
            }
        }
        let phases: Vec<u16> = if f.is_qubit() {
            cols.iter()
                .map(|col| {
                    let ys = (col[0] & col[2]) + (col[1] & col[3]);
                    let sign = rng.random_range(0..2u16);
                    (ys + 2 * sign) % 4
                })
                .collect()
        } else {
            (0..4).map(|_| rng.random_range(0..p) as u16).collect()
        };
        let gate = Self::from_parts(field, 2, m, phases);
        debug_assert!(gate.is_symplectic());
        gate
    }

    fn build_table(&mut self) {
        let a = self.arity;
        let d = 2 * a;
        let low = (1u16 << a) - 1;
        let images: Vec<(u16, u16)> = (0..d)
            .map(|c| {
                let bits = (0..d).fold(0u16, |acc, r| acc | ((self.matrix[r * d + c] & 1) << r));
                (bits, self.phases[c])
            })
            .collect();
        let mut table = Vec::with_capacity(1 << d);
        for v in 0..(1usize << d) {
            // product of basis images in site order X_0 Z_0 X_1 Z_1 …
            let (mut img, mut ph) = (0u16, 0u32);
            for s in 0..a {
                for c in [s, a + s] {
                    if (v >> c) & 1 == 1 {
                        let (bits, phc) = images[c];
                        ph += phc as u32 + 2 * ((img >> a) & bits & low).count_ones();
                        img ^= bits;
                    }
                }
            }
            table.push((img, (ph % 4) as u8));
        }
        self.table = table;
    }
}

/// Uniform vector `w` (after `map`) with `<v, w> = 1`: draw until the product
/// is nonzero, then rescale. Each target has exactly p - 1 preimages.
fn partner<R: Rng + ?Sized>(
    v: &[u16; 4],
    draw: &mut impl FnMut(&mut R) -> [u16; 4],
    rng: &mut R,
    f: &PrimeField,
    map: impl Fn([u16; 4]) -> [u16; 4],
) -> [u16; 4] {
    loop {
        let w = map(draw(rng));
        let s = local_symplectic(v, &w, f);
        if s != 0 {
            let k = f.inv(s);
            return core::array::from_fn(|i| f.mul(w[i], k));
        }
    }
}

fn local_symplectic(u: &[u16], v: &[u16], f: &PrimeField) -> u16 {
    let a = u.len() / 2;
    crate::pauli::symplectic(&u[..a], &u[a..], &v[..a], &v[a..], f)
}

fn standard_form(i: usize, j: usize, a: usize, f: &PrimeField) -> u16 {
    if i < a && j == i + a {
        1
    } else if i >= a && j + a == i {
        f.neg(1)
    } else {
        0
    }
}

fn invert_matrix(m: &[u16], d: usize, f: &PrimeField) -> Option<Vec<u16>> {
    let mut a = m.to_vec();
    let mut inv = vec![0u16; d * d];
    for i in 0..d {
        inv[i * d + i] = 1;
    }
    for col in 0..d {
        let piv = (col..d).find(|&r| a[r * d + col] != 0)?;
        if piv != col {
            for c in 0..d {
                a.swap(piv * d + c, col * d + c);
                inv.swap(piv * d + c, col * d + c);
            }
        }
        let k = f.inv(a[col * d + col]);
        for c in 0..d {
            a[col * d + c] = f.mul(a[col * d + c], k);
            inv[col * d + c] = f.mul(inv[col * d + c], k);
        }
        for r in 0..d {
            let factor = a[r * d + col];
            if r == col || factor == 0 {
                continue;
            }
            for c in 0..d {
                a[r * d + c] = f.sub(a[r * d + c], f.mul(factor, a[col * d + c]));
                inv[r * d + c] = f.sub(inv[r * d + c], f.mul(factor, inv[col * d + c]));
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn word(x: &[u16], z: &[u16], phase: u16) -> PauliWord {
        PauliWord { x: x.to_vec(), z: z.to_vec(), phase }
    }

    #[test]
    fn cnot_conjugation() {
        let f = PrimeField::new(2).unwrap();
        let cx = CliffordGate::sum(f);
        assert_eq!(cx.conjugate(&word(&[1, 0], &[0, 0], 0)), word(&[1, 1], &[0, 0], 0));
        assert_eq!(cx.conjugate(&word(&[0, 0], &[0, 1], 0)), word(&[0, 0], &[1, 1], 0));
        assert_eq!(cx.conjugate(&word(&[0, 1], &[0, 0], 0)), word(&[0, 1], &[0, 0], 0));
    }

    #[test]
    fn rejects_non_symplectic() {
        let f = PrimeField::new(3).unwrap();
        let mut m = vec![0u16; 16];
        m[0] = 1;
        m[5] = 1;
        m[10] = 1;
        m[15] = 2;
        assert!(CliffordGate::new(f, 2, m, vec![0; 4]).is_err());
    }

    #[test]
    fn rejects_antihermitian_qubit_image() {
        let f = PrimeField::new(2).unwrap();
        let id = CliffordGate::identity(f, 1);
        assert!(CliffordGate::new(f, 1, id.symplectic_matrix().to_vec(), vec![1, 0]).is_err());
    }

    #[test]
    fn samples_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [2, 3, 5, 7, 11, 997] {
            let f = PrimeField::new(p).unwrap();
            for _ in 0..200 {
                let g = CliffordGate::sample_two_qudit(f, &mut rng);
                assert!(g.is_symplectic());
            }
        }
    }

    #[test]
    fn inverse_round_trip_qutrit() {
        let f = PrimeField::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let g = CliffordGate::sample_two_qudit(f, &mut rng);
            let gi = g.inverse();
            let x0 = word(&[1, 0], &[0, 0], 0);
            assert_eq!(gi.conjugate(&g.conjugate(&x0)), x0);
        }
    }

    #[test]
    fn inverse_round_trip_all_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2u32, 5] {
            let f = PrimeField::new(p).unwrap();
            let g = CliffordGate::sample_two_qudit(f, &mut rng);
            let gi = g.inverse();
            for v in 0..(p as usize).pow(4) {
                let e: Vec<u16> = (0..4).map(|i| ((v / (p as usize).pow(i)) % p as usize) as u16).collect();
                let w = word(&e[..2], &e[2..], 0);
                assert_eq!(gi.conjugate(&g.conjugate(&w)), w);
            }
        }
    }

    #[test]
    fn conjugation_preserves_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [2u32, 3, 7] {
            let f = PrimeField::new(p).unwrap();
            let g = CliffordGate::sample_two_qudit(f, &mut rng);
            for _ in 0..50 {
                let a = word(
                    &[rng.random_range(0..p) as u16, rng.random_range(0..p) as u16],
                    &[rng.random_range(0..p) as u16, rng.random_range(0..p) as u16],
                    0,
                );
                let b = word(
                    &[rng.random_range(0..p) as u16, rng.random_range(0..p) as u16],
                    &[rng.random_range(0..p) as u16, rng.random_range(0..p) as u16],
                    0,
                );
                let lhs = g.conjugate(&a.mul(&b, &f));
                let rhs = g.conjugate(&a).mul(&g.conjugate(&b), &f);
                assert_eq!(lhs, rhs);
                assert_eq!(
                    a.symplectic_product(&b, &f),
                    g.conjugate(&a).symplectic_product(&g.conjugate(&b), &f)
                );
            }
        }
    }
}
