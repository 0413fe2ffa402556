//! Arithmetic in the prime field F_p used for qudit Pauli exponents.

use crate::Error;

/// Largest supported qudit dimension. Exponents are stored as `u16` and the
/// sum of two reduced entries must not overflow.
pub const MAX_DIMENSION: u32 = 32749;

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// The field F_p together with the modulus of the phase ring that goes with it:
/// phases live in Z_p for odd p (symmetric Weyl convention) and in Z_4 for
/// qubits (powers of i).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
    half: u32,
    // ceil(2^64 / p), for division-free reduction of 32-bit values
    magic: u64,
    // floor(2^32 / p), for vectorisable Barrett reduction in row updates
    barrett: u64,
}

impl PrimeField {
    pub fn new(p: u32) -> Result<Self, Error> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if p > MAX_DIMENSION {
            return Err(Error::DimensionTooLarge { dim: p, max: MAX_DIMENSION });
        }
        let half = if p == 2 { 0 } else { (p + 1) / 2 };
        Ok(Self { p, half, magic: (u64::MAX / p as u64).wrapping_add(1), barrett: (1u64 << 32) / p as u64 })
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn is_qubit(&self) -> bool {
        self.p == 2
    }

    /// Modulus of phase exponents.
    #[inline]
    pub fn phase_modulus(&self) -> u32 {
        if self.p == 2 {
            4
        } else {
            self.p
        }
    }

    /// How many phase units make up one power of ω = e^{2πi/p}.
    #[inline]
    pub fn omega_units(&self) -> u32 {
        if self.p == 2 {
            2
        } else {
            1
        }
    }

    /// Multiplicative inverse of 2; only meaningful for odd p.
    #[inline]
    pub fn half(&self) -> u32 {
        self.half
    }

    #[inline]
    pub fn reduce(&self, a: u64) -> u16 {
        (a % self.p as u64) as u16
    }

    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        let s = a as u32 + b as u32;
        (if s >= self.p { s - self.p } else { s }) as u16
    }

    #[inline]
    pub fn sub(&self, a: u16, b: u16) -> u16 {
        let (a, b) = (a as u32, b as u32);
        (if a >= b { a - b } else { a + self.p - b }) as u16
    }

    #[inline]
    pub fn neg(&self, a: u16) -> u16 {
        if a == 0 {
            0
        } else {
            (self.p - a as u32) as u16
        }
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        self.reduce32(a as u32 * b as u32)
    }

    /// `a mod p` without a hardware division.
    #[inline]
    pub fn reduce32(&self, a: u32) -> u16 {
        let low = self.magic.wrapping_mul(a as u64);
        ((low as u128 * self.p as u128) >> 64) as u16
    }

    /// `row ← row + k·src` elementwise. Inputs must be reduced.
    pub fn axpy(&self, row: &mut [u16], src: &[u16], k: u16) {
        let (p, b, k) = (self.p, self.barrett, k as u32);
        for (a, &s) in row.iter_mut().zip(src) {
            let x = *a as u32 + k * s as u32;
            let q = ((x as u64 * b) >> 32) as u32;
            let r = x - q * p;
            *a = (if r >= p { r - p } else { r }) as u16;
        }
    }

    /// `row ← row + src` elementwise. Inputs must be reduced.
    pub fn add_row(&self, row: &mut [u16], src: &[u16]) {
        let p = self.p as u16;
        for (a, &s) in row.iter_mut().zip(src) {
            let x = *a + s;
            *a = if x >= p { x - p } else { x };
        }
    }

    pub fn pow(&self, mut base: u16, mut exp: u32) -> u16 {
        let mut acc = 1u16 % self.p as u16;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse of a nonzero element.
    pub fn inv(&self, a: u16) -> u16 {
        assert!(a as u32 % self.p != 0, "zero has no inverse in F_{}", self.p);
        self.pow(a, self.p - 2)
    }

    /// Reduce a signed value into the phase ring.
    #[inline]
    pub fn phase(&self, a: i64) -> u16 {
        a.rem_euclid(self.phase_modulus() as i64) as u16
    }

    #[inline]
    pub fn phase_add(&self, a: u16, b: u16) -> u16 {
        ((a as u32 + b as u32) % self.phase_modulus()) as u16
    }
}
