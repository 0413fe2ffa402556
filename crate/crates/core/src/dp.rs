//! Classical bond directed percolation on the brickwork lattice.
//!
//! Bonds are worldline segments between gate layers. A gate whose two input
//! bonds are inactive leaves them inactive; otherwise its outputs are drawn
//! from a [`PairDistribution`]. The flag dynamics of the adaptive Clifford
//! circuit is exactly the standard kernel with `p̃ = p`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::circuit::{check_geometry, layer_pairs, Boundary, Parity, SpacetimeRecord};
use crate::Error;

/// Critical point of standard bond DP on this lattice.
pub const STANDARD_PC: f64 = 0.355299814;

/// Output distribution of an active gate; `p01` is (left inactive, right active).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDistribution {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

fn check_rate(p: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("rate must lie in [0, 1]"))
    }
}

impl PairDistribution {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self, Error> {
        let d = Self { p00, p01, p10, p11 };
        if d.probs().iter().any(|&x| !(0.0..=1.0).contains(&x)) || libm::fabs(d.total() - 1.0) > 1e-12 {
            return Err(Error::InvalidArgument("pair probabilities must be a distribution"));
        }
        Ok(d)
    }

    /// The channel-level reduction of a Haar-random gate followed by resets
    /// at rate `p` on qudits of dimension `q + 1`.
    pub fn haar(p: f64, q: u64) -> Result<Self, Error> {
        check_rate(p)?;
        if q == 0 {
            return Err(Error::InvalidArgument("q must be at least 1"));
        }
        let q = q as f64;
        let den = 2.0 + q;
        let p00 = p * (2.0 + p * q) / den;
        let p01 = (1.0 - p) * (1.0 + p * q) / den;
        let p11 = q * (1.0 - p) * (1.0 - p) / den;
        Ok(Self { p00, p01, p10: p01, p11 })
    }

    /// Independent outputs, each inactive with probability `p̃`.
    pub fn standard(pt: f64) -> Result<Self, Error> {
        check_rate(pt)?;
        let r = 1.0 - pt;
        Ok(Self { p00: pt * pt, p01: pt * r, p10: r * pt, p11: r * r })
    }

    pub fn probs(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }

    pub fn total(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }

    /// Probability that a given output is inactive.
    pub fn inactive_marginal(&self) -> f64 {
        self.p00 + self.p01
    }

    pub fn sampler(&self) -> PairSampler {
        PairSampler::new(self)
    }
}

/// Draws outputs with one 64-bit word per active gate.
#[derive(Clone, Copy, Debug)]
pub struct PairSampler {
    // cumulative thresholds scaled by 2^64
    cuts: [u128; 3],
}

impl PairSampler {
    fn new(d: &PairDistribution) -> Self {
        let scale = 18_446_744_073_709_551_616.0; // 2^64
        let mut acc = 0.0;
        let mut cuts = [0u128; 3];
        for (c, p) in cuts.iter_mut().zip(d.probs()) {
            acc += p;
            *c = if acc >= 1.0 { 1u128 << 64 } else { (acc * scale) as u128 };
        }
        Self { cuts }
    }

    /// Output activities `(left, right)`.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (bool, bool) {
        let u = rng.next_u64() as u128;
        if u < self.cuts[0] {
            (false, false)
        } else if u < self.cuts[1] {
            (false, true)
        } else if u < self.cuts[2] {
            (true, false)
        } else {
            (true, true)
        }
    }
}

/// Solution of `p + (1 - p)/q = p̃_c`: the critical rate of the Haar
/// process to first order in `1/q`.
pub fn haar_pc_estimate(q: f64) -> Result<f64, Error> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument("the estimate needs q > 1"));
    }
    if q.is_infinite() {
        return Ok(STANDARD_PC);
    }
    Ok((q * STANDARD_PC - 1.0) / (q - 1.0))
}

/// A row of bond occupations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondRow {
    pub occupations: Vec<bool>,
}

impl BondRow {
    pub fn active(len: usize) -> Self {
        Self { occupations: vec![true; len] }
    }

    pub fn len(&self) -> usize {
        self.occupations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.occupations.iter().filter(|&&a| a).count() as f64 / self.len() as f64
    }

    pub fn is_absorbed(&self) -> bool {
        !self.occupations.contains(&true)
    }
}

/// One layer of gates of the given parity.
pub fn dp_step<R: RngCore + ?Sized>(row: &mut BondRow, sampler: &PairSampler, parity: Parity, boundary: Boundary, rng: &mut R) {
    let occ = &mut row.occupations;
    for (j, k) in layer_pairs(occ.len(), parity, boundary) {
        if occ[j] || occ[k] {
            let (a, b) = sampler.sample(rng);
            occ[j] = a;
            occ[k] = b;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpParams {
    pub len: usize,
    pub depth: usize,
    pub boundary: Boundary,
    pub dist: PairDistribution,
    pub record: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpRun {
    /// Density of active bonds for `t = 0..=T`.
    pub density: Vec<f64>,
    pub spacetime: Option<SpacetimeRecord>,
}

/// Iterate the kernel from a fully active row.
pub fn run_dp<R: Rng + ?Sized>(params: &DpParams, rng: &mut R) -> Result<DpRun, Error> {
    check_geometry(params.len, params.boundary)?;
    let sampler = params.dist.sampler();
    let mut row = BondRow::active(params.len);
    let mut spacetime = params.record.then(|| SpacetimeRecord::new(params.len));
    let none = vec![false; params.len];
    let mut density = Vec::with_capacity(params.depth + 1);
    density.push(1.0);
    for t in 1..=params.depth {
        if row.is_absorbed() {
            // nothing moves any more
            density.resize(params.depth + 1, 0.0);
            if let Some(st) = spacetime.as_mut() {
                for _ in t..=params.depth {
                    st.push_row(&none, &none);
                }
            }
            break;
        }
        dp_step(&mut row, &sampler, Parity::of_layer(t), params.boundary, rng);
        density.push(row.density());
        if let Some(st) = spacetime.as_mut() {
            st.push_row(&row.occupations, &none);
        }
    }
    Ok(DpRun { density, spacetime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_examples() {
        let d = PairDistribution::haar(0.0, 2).unwrap();
        assert_eq!(d.probs(), [0.0, 0.25, 0.25, 0.5]);
        let d = PairDistribution::haar(1.0, 7).unwrap();
        assert_eq!(d.probs(), [1.0, 0.0, 0.0, 0.0]);
        for p in [0.0, 0.2, 0.3553, 0.9] {
            let h = PairDistribution::haar(p, 1_000_000).unwrap();
            let s = PairDistribution::standard(p).unwrap();
            for (a, b) in h.probs().iter().zip(s.probs()) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn standard_examples() {
        assert_eq!(PairDistribution::standard(0.5).unwrap().probs(), [0.25; 4]);
        assert_eq!(PairDistribution::standard(0.0).unwrap().probs(), [0.0, 0.0, 0.0, 1.0]);
        assert!(PairDistribution::standard(1.5).is_err());
        assert!(PairDistribution::new(0.5, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn pc_estimate() {
        assert!((haar_pc_estimate(f64::INFINITY).unwrap() - STANDARD_PC).abs() < 1e-15);
        let p = haar_pc_estimate(100.0).unwrap();
        assert!((p + (1.0 - p) / 100.0 - STANDARD_PC).abs() < 1e-15);
        assert!((p - 0.348_787_69).abs() < 1e-8);
        assert!(haar_pc_estimate(1.0).is_err());
    }

    #[test]
    fn certain_outcomes_never_miss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let all = PairDistribution::standard(0.0).unwrap().sampler();
        let none = PairDistribution::standard(1.0).unwrap().sampler();
        for _ in 0..10_000 {
            assert_eq!(all.sample(&mut rng), (true, true));
            assert_eq!(none.sample(&mut rng), (false, false));
        }
    }

    #[test]
    fn absorbing_and_certain_reset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PairDistribution::standard(0.3).unwrap().sampler();
        let mut row = BondRow { occupations: vec![false; 16] };
        for t in 1..50 {
            dp_step(&mut row, &s, Parity::of_layer(t), Boundary::Periodic, &mut rng);
        }
        assert!(row.is_absorbed());
        let s = PairDistribution::standard(1.0).unwrap().sampler();
        let mut row = BondRow::active(16);
        dp_step(&mut row, &s, Parity::Even, Boundary::Periodic, &mut rng);
        assert!(row.is_absorbed());
    }

    #[test]
    fn run_records_every_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params =
            DpParams { len: 32, depth: 40, boundary: Boundary::Open, dist: PairDistribution::standard(0.8).unwrap(), record: true };
        let run = run_dp(&params, &mut rng).unwrap();
        assert_eq!(run.density.len(), 41);
        let st = run.spacetime.unwrap();
        assert_eq!(st.depth(), 40);
        for t in 0..=40 {
            assert!((st.row_count(t) as f64 / 32.0 - run.density[t]).abs() < 1e-15);
        }
    }
}
