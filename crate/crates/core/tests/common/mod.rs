#![allow(dead_code)]

use num_complex::Complex64;
use qlsp_core::{ComplexMatrix, Pauli, PauliString, PauliSum, StateVector};
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_string<R: Rng>(n: usize, rng: &mut R) -> PauliString {
    let letters: Vec<Pauli> = (0..n).map(|_| Pauli::ALL[rng.random_range(0..4)]).collect();
    PauliString::from_letters(&letters).unwrap()
}

pub fn random_k_local<R: Rng>(n: usize, k: usize, rng: &mut R) -> PauliString {
    let mut letters = vec![Pauli::I; n];
    for q in rand::seq::index::sample(rng, n, k) {
        letters[q] = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
    }
    PauliString::from_letters(&letters).unwrap()
}

/// `l` random strings with complex weights, scaled so `Σ|c| = 1`.
pub fn random_matrix_sum<R: Rng>(n: usize, l: usize, complex: bool, rng: &mut R) -> PauliSum {
    let mut s = PauliSum::new(n);
    for _ in 0..l {
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        s.push(c(rng.random_range(-1.0..1.0), im), random_string(n, rng)).unwrap();
    }
    let total: f64 = s.terms().iter().map(|(c, _)| c.norm()).sum();
    s.scale(c(1.0 / total.max(1e-12), 0.0))
}

/// Product of `exp(i t P)` factors, a unitary with at most `2^factors` terms.
pub fn random_unitary_sum<R: Rng>(n: usize, factors: usize, rng: &mut R) -> PauliSum {
    let mut u = PauliSum::identity(n, c(1.0, 0.0));
    for _ in 0..factors {
        let t: f64 = rng.random_range(-3.0..3.0);
        let f = PauliSum::from_terms(
            n,
            [
                (c(t.cos(), 0.0), PauliString::identity(n)),
                (c(0.0, t.sin()), random_string(n, rng)),
            ],
        )
        .unwrap()
        .simplify(0.0);
        u = u.compose(&f).unwrap();
    }
    u
}

pub fn random_dense<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random matrix rescaled to spectral norm `target`.
pub fn random_contraction<R: Rng>(dim: usize, target: f64, rng: &mut R) -> ComplexMatrix {
    let m = random_dense(dim, rng);
    let s = m.spectral_norm();
    m.scale(c(target / s, 0.0))
}

/// `C_L = 1 − (1/n) Σ_j ‖(|0⟩⟨0|_j ⊗ I) U†A x‖² / ‖A x‖²` from dense matrices.
pub fn dense_local_cost(a: &ComplexMatrix, u: &ComplexMatrix, x: &StateVector) -> f64 {
    let n = x.num_qubits();
    let psi = a.mul_vec(x.amplitudes()).unwrap();
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let phi = u.adjoint().mul_vec(&psi).unwrap();
    let mut acc = 0.0;
    for j in 0..n {
        let bit = n - 1 - j;
        acc += phi
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> bit) & 1 == 0)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>();
    }
    1.0 - acc / (n as f64 * norm2)
}

/// Dense `U|0⟩` solution check: the normalized `A⁻¹ U|0⟩`.
pub fn dense_solution(a: &ComplexMatrix, u: &ComplexMatrix) -> StateVector {
    let b: Vec<Complex64> = (0..u.dim()).map(|r| u.get(r, 0)).collect();
    StateVector::from_amplitudes(a.solve(&b).unwrap()).unwrap().normalized().unwrap()
}
