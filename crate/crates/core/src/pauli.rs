//! Generalized Pauli (Weyl) operators on `n` qudits of prime dimension.
//!
//! A word is stored as exponent vectors `(x, z)` over F_p and a phase
//! exponent. For odd p the word is `ω^phase · ⊗_j ω^{x_j z_j / 2} X^{x_j} Z^{z_j}`
//! with ω = e^{2πi/p}, so that every Clifford acts on phases linearly. For
//! p = 2 the word is `i^phase · ⊗_j X^{x_j} Z^{z_j}` with the phase taken mod 4.
//!
//! The symplectic product is `<u, v> = Σ_j u.x_j v.z_j - u.z_j v.x_j (mod p)`;
//! two words commute exactly when it vanishes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::field::PrimeField;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    pub x: Vec<u16>,
    pub z: Vec<u16>,
    pub phase: u16,
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        Self { x: vec![0; n], z: vec![0; n], phase: 0 }
    }

    /// `X_site`.
    pub fn x_at(n: usize, site: usize) -> Self {
        let mut w = Self::identity(n);
        w.x[site] = 1;
        w
    }

    /// `Z_site`.
    pub fn z_at(n: usize, site: usize) -> Self {
        let mut w = Self::identity(n);
        w.z[site] = 1;
        w
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.phase == 0 && self.x.iter().chain(&self.z).all(|&e| e == 0)
    }

    /// True when the exponent vector is zero, ignoring the phase.
    pub fn is_scalar(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&e| e == 0)
    }

    pub fn symplectic_product(&self, other: &Self, field: &PrimeField) -> u16 {
        symplectic(&self.x, &self.z, &other.x, &other.z, field)
    }

    pub fn commutes_with(&self, other: &Self, field: &PrimeField) -> bool {
        self.symplectic_product(other, field) == 0
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self, field: &PrimeField) -> Self {
        let mut out = self.clone();
        out.mul_assign(other, field);
        out
    }

    /// In-place `self ← self · other`.
    pub fn mul_assign(&mut self, other: &Self, field: &PrimeField) {
        let shift = product_phase(&self.x, &self.z, &other.x, &other.z, field);
        self.phase = field.phase_add(field.phase_add(self.phase, other.phase), shift);
        for (a, &b) in self.x.iter_mut().zip(&other.x) {
            *a = field.add(*a, b);
        }
        for (a, &b) in self.z.iter_mut().zip(&other.z) {
            *a = field.add(*a, b);
        }
    }

    /// `self^k` for odd p. For qubits only `k ∈ {0, 1}` is supported (every
    /// Hermitian word squares to the identity).
    pub fn pow(&self, k: u16, field: &PrimeField) -> Self {
        if field.is_qubit() {
            return match k % 2 {
                0 => Self::identity(self.len()),
                _ => self.clone(),
            };
        }
        Self {
            x: self.x.iter().map(|&e| field.mul(e, k)).collect(),
            z: self.z.iter().map(|&e| field.mul(e, k)).collect(),
            phase: field.mul(self.phase, k),
        }
    }

    /// Debug row `x_0 … x_{n-1} | z_0 … z_{n-1} | phase`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let join = |s: &mut String, v: &[u16]| {
            for (i, e) in v.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{e}");
            }
        };
        join(&mut s, &self.x);
        s.push_str(" | ");
        join(&mut s, &self.z);
        let _ = write!(s, " | {}", self.phase);
        s
    }
}

#[inline]
pub(crate) fn symplectic(ux: &[u16], uz: &[u16], vx: &[u16], vz: &[u16], field: &PrimeField) -> u16 {
    let mut plus = 0u64;
    let mut minus = 0u64;
    for j in 0..ux.len() {
        plus += ux[j] as u64 * vz[j] as u64;
        minus += uz[j] as u64 * vx[j] as u64;
    }
    let p = field.order() as u64;
    ((plus % p + p - minus % p) % p) as u16
}

/// Phase picked up when multiplying the bare exponent vectors `u · v`.
#[inline]
pub(crate) fn product_phase(ux: &[u16], uz: &[u16], vx: &[u16], vz: &[u16], field: &PrimeField) -> u16 {
    if field.is_qubit() {
        let mut c = 0u32;
        for j in 0..ux.len() {
            c += (uz[j] & vx[j]) as u32;
        }
        ((2 * c) % 4) as u16
    } else {
        let s = symplectic(ux, uz, vx, vz, field);
        // -s/2
        field.neg(field.mul(s, field.half() as u16))
    }
}
