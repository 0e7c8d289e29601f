#![allow(dead_code)]

use chainrand::qcore::{DensityMatrix, HermitianOperator, Measurement, Realization};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub fn pure_amplitudes(rng: &mut impl Rng) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..4)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|z| z / n).collect()
}

/// Two-qubit pure state with projective spin measurements along random axes.
pub fn random_realization(
    rng: &mut impl Rng,
    alice_inputs: usize,
    bob_inputs: usize,
) -> Realization {
    let state = DensityMatrix::pure(&pure_amplitudes(rng)).unwrap();
    let mut spin =
        |_| Measurement::observable(&HermitianOperator::bloch(unit_vector(rng))).unwrap();
    let alice = (0..alice_inputs).map(&mut spin).collect();
    let bob = (0..bob_inputs).map(&mut spin).collect();
    Realization::new(state, alice, bob).unwrap()
}

// Plain complex arithmetic, independent of the library's operator types.
pub type C2 = [[Complex64; 2]; 2];

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn effect_from_bloch(weight: f64, v: [f64; 3]) -> C2 {
    [
        [c(weight + v[2], 0.0), c(v[0], -v[1])],
        [c(v[0], v[1]), c(weight - v[2], 0.0)],
    ]
}

/// `⟨ψ| A ⊗ B |ψ⟩` by explicit index sums.
pub fn born(psi: &[Complex64], a: &C2, b: &C2) -> f64 {
    let mut s = c(0.0, 0.0);
    for r in 0..4 {
        for col in 0..4 {
            let entry = a[r / 2][col / 2] * b[r % 2][col % 2];
            s += psi[r].conj() * entry * psi[col];
        }
    }
    s.re
}

pub fn phi_plus() -> Vec<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
