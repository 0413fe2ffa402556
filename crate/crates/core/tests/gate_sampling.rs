//! Statistical checks of the two-qudit Clifford sampler.

use std::collections::HashMap;

use etn_core::{CliffordGate, PauliWord, PrimeField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// |Sp(4, p)| = p^4 (p^2 - 1)(p^4 - 1)
fn sp4_order(p: u64) -> u64 {
    p.pow(4) * (p * p - 1) * (p.pow(4) - 1)
}

fn chi_square_p_value(counts: &HashMap<Vec<u16>, u64>, classes: u64, samples: u64) -> f64 {
    let expected = samples as f64 / classes as f64;
    let observed: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // classes never drawn contribute their full expectation
    let missing = (classes - counts.len() as u64) as f64 * expected;
    let stat = observed + missing;
    1.0 - ChiSquared::new((classes - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn qubit_symplectic_part_is_uniform() {
    assert_eq!(sp4_order(2), 720);
    let f = PrimeField::new(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let samples = 1_000_000u64;
    let mut sym = HashMap::new();
    let mut joint = HashMap::new();
    for _ in 0..samples {
        let g = CliffordGate::sample_two_qudit(f, &mut rng);
        let m = g.symplectic_matrix().to_vec();
        *sym.entry(m.clone()).or_insert(0u64) += 1;
        let mut key = m;
        key.extend_from_slice(g.phase_function());
        *joint.entry(key).or_insert(0u64) += 1;
    }
    assert_eq!(sym.len(), 720);
    let p_sym = chi_square_p_value(&sym, 720, samples);
    assert!(p_sym > 1e-3, "symplectic part p-value {p_sym}");
    // each symplectic part comes with 16 Pauli translates
    assert_eq!(joint.len(), 720 * 16);
    let p_joint = chi_square_p_value(&joint, 720 * 16, samples);
    assert!(p_joint > 1e-3, "joint p-value {p_joint}");
}

#[test]
fn qutrit_symplectic_part_is_uniform() {
    let f = PrimeField::new(3).unwrap();
    let classes = sp4_order(3);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples = 1_000_000u64;
    let mut sym = HashMap::new();
    for _ in 0..samples {
        let g = CliffordGate::sample_two_qudit(f, &mut rng);
        *sym.entry(g.symplectic_matrix().to_vec()).or_insert(0u64) += 1;
    }
    assert_eq!(sym.len() as u64, classes);
    let p = chi_square_p_value(&sym, classes, samples);
    assert!(p > 1e-3, "p-value {p}");
}

#[test]
fn qutrit_inverse_undoes_every_word() {
    let f = PrimeField::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let g = CliffordGate::sample_two_qudit(f, &mut rng);
        let gi = g.inverse();
        for v in 0..81u16 {
            let e: Vec<u16> = (0..4).map(|i| v / 3u16.pow(i) % 3).collect();
            for phase in 0..3 {
                let w = PauliWord { x: e[..2].to_vec(), z: e[2..].to_vec(), phase };
                assert_eq!(gi.conjugate(&g.conjugate(&w)), w);
                assert_eq!(g.conjugate(&gi.conjugate(&w)), w);
            }
        }
    }
}
