//! Dense state-vector simulation.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::pauli::{walsh_hadamard, Pauli, PauliString, Phase};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    RX(usize, f64),
    RY(usize, f64),
    RZ(usize, f64),
    Cnot { control: usize, target: usize },
    Pauli(usize, Pauli),
    /// Every non-identity letter of `string`, controlled on `control`.
    /// The string spans the whole register and must be `I` on the control.
    ControlledPauli { control: usize, string: PauliString },
}

impl Gate {
    /// The 2×2 matrix of a single-qubit gate, `None` for multi-qubit gates.
    pub fn matrix_1q(&self) -> Option<Mat2> {
        let c = |re: f64| Complex64::new(re, 0.0);
        Some(match *self {
            Gate::H(_) => [[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)]],
            Gate::S(_) => [[ONE, ZERO], [ZERO, I]],
            Gate::Sdg(_) => [[ONE, ZERO], [ZERO, -I]],
            Gate::RX(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co), Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), c(co)]]
            }
            Gate::RY(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co), c(-s)], [c(s), c(co)]]
            }
            Gate::RZ(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[Complex64::new(co, -s), ZERO], [ZERO, Complex64::new(co, s)]]
            }
            Gate::Pauli(_, p) => match p {
                Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
                Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
                Pauli::Y => [[ZERO, -I], [I, ZERO]],
                Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
            },
            Gate::Cnot { .. } | Gate::ControlledPauli { .. } => return None,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        let q = |index: usize| {
            if index < n {
                Ok(())
            } else {
                Err(Error::QubitIndex { index, n })
            }
        };
        match self {
            Gate::H(t) | Gate::S(t) | Gate::Sdg(t) | Gate::Pauli(t, _) => q(*t),
            Gate::RX(t, a) | Gate::RY(t, a) | Gate::RZ(t, a) => {
                if !a.is_finite() {
                    return Err(Error::InvalidArgument(format!("rotation angle {a}")));
                }
                q(*t)
            }
            Gate::Cnot { control, target } => {
                q(*control)?;
                q(*target)?;
                if control == target {
                    return Err(Error::InvalidArgument("CNOT control equals target".into()));
                }
                Ok(())
            }
            Gate::ControlledPauli { control, string } => {
                q(*control)?;
                if string.num_qubits() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        found: string.num_qubits(),
                    });
                }
                if string.letter(*control) != Pauli::I {
                    return Err(Error::InvalidArgument(
                        "controlled string acts on its own control".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Scale {
            what: "state vector",
            n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

impl StateVector {
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_size(n)?;
        let mut amps = vec![ZERO; 1 << n];
        *amps.get_mut(index).ok_or(Error::InvalidArgument(format!(
            "basis index {index} outside {n}-qubit register"
        )))? = ONE;
        Ok(StateVector { n, amps })
    }

    /// Wraps raw amplitudes without normalizing them.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidArgument(format!(
                "{len} amplitudes is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_size(n)?;
        Ok(StateVector { n, amps })
    }

    /// Haar-random pure state from normalized complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_size(n)?;
        let amps = (0..1usize << n)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        StateVector { n, amps }.normalized()
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(StateVector {
            n: self.n,
            amps: self.amps.iter().map(|a| a / nrm).collect(),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.same_size(other.n)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn same_size(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Dimension {
                expected: self.n,
                found: n,
            });
        }
        Ok(())
    }

    /// Returns `g · self`.
    pub fn apply_gate(&self, g: &Gate) -> Result<StateVector> {
        let mut s = self.clone();
        s.apply(g)?;
        Ok(s)
    }

    /// Applies `g` in place.
    pub fn apply(&mut self, g: &Gate) -> Result<()> {
        g.check(self.n)?;
        match g {
            Gate::H(t) | Gate::S(t) | Gate::Sdg(t) | Gate::Pauli(t, _) => {
                self.apply_1q(*t, &g.matrix_1q().expect("single-qubit gate"))
            }
            Gate::RX(t, _) | Gate::RZ(t, _) => {
                self.apply_1q(*t, &g.matrix_1q().expect("single-qubit gate"))
            }
            Gate::RY(t, theta) => self.apply_ry(*t, *theta),
            Gate::Cnot { control, target } => {
                let cb = self.bit(*control);
                let tb = self.bit(*target);
                for b in 0..self.amps.len() {
                    if b & cb != 0 && b & tb == 0 {
                        self.amps.swap(b, b | tb);
                    }
                }
            }
            Gate::ControlledPauli { control, string } => {
                self.apply_pauli_masked(string, self.bit(*control));
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[Gate]) -> Result<()> {
        gates.iter().try_for_each(|g| self.apply(g))
    }

    #[inline]
    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let bit = self.bit(q);
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let (a0, a1) = (self.amps[b], self.amps[b | bit]);
                self.amps[b] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = self.bit(q);
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let (a0, a1) = (self.amps[b], self.amps[b | bit]);
                self.amps[b] = a0 * c - a1 * s;
                self.amps[b | bit] = a0 * s + a1 * c;
            }
        }
    }

    /// Applies `P` to the amplitudes whose index overlaps `control`
    /// (all of them when `control == 0`).
    fn apply_pauli_masked(&mut self, p: &PauliString, control: usize) {
        let x = p.x_mask() as usize;
        let z = p.z_mask() as usize;
        let base = Phase::from_exponent(p.y_count()).to_complex();
        let old = self.amps.clone();
        for (b, &a) in old.iter().enumerate() {
            if control != 0 && b & control == 0 {
                continue;
            }
            let sign = if (z & b).count_ones() % 2 == 0 { base } else { -base };
            self.amps[b ^ x] = sign * a;
        }
    }

    /// `P · self`.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        self.same_size(p.num_qubits())?;
        let mut s = self.clone();
        s.apply_pauli_masked(p, 0);
        Ok(s)
    }

    /// `m · self`, without renormalizing.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> Result<StateVector> {
        Ok(StateVector {
            n: self.n,
            amps: m.mul_vec(&self.amps)?,
        })
    }

    /// `⟨self|P|self⟩` as a complex number (real for normalized states up to rounding).
    pub fn pauli_matrix_element(&self, p: &PauliString) -> Result<Complex64> {
        self.same_size(p.num_qubits())?;
        let x = p.x_mask() as usize;
        let z = p.z_mask() as usize;
        let acc: Complex64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(b, &a)| {
                let t = self.amps[b ^ x].conj() * a;
                if (z & b).count_ones() % 2 == 0 {
                    t
                } else {
                    -t
                }
            })
            .sum();
        Ok(acc * Phase::from_exponent(p.y_count()).to_complex())
    }

    /// Real part of `⟨self|P|self⟩`.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        Ok(self.pauli_matrix_element(p)?.re)
    }

    /// `⟨P⟩` for all `4^n` strings, indexed by `(x << n) | z`.
    pub fn all_pauli_expectations(&self) -> Vec<f64> {
        let dim = self.amps.len();
        let mut out = vec![0.0; dim * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(x, row)| {
            let mut g: Vec<Complex64> = (0..dim).map(|b| self.amps[b ^ x].conj() * self.amps[b]).collect();
            walsh_hadamard(&mut g);
            for (z, v) in g.into_iter().enumerate() {
                let y = (x & z).count_ones();
                row[z] = (v * Phase::from_exponent(y).to_complex()).re;
            }
        });
        out
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// One computational-basis index drawn with probability `|a_i|²`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total: f64 = self.amps.iter().map(|a| a.norm_sqr()).sum();
        let mut u = rng.random::<f64>() * total;
        for (i, a) in self.amps.iter().enumerate() {
            u -= a.norm_sqr();
            if u < 0.0 {
                return i;
            }
        }
        // rounding left a sliver; fall back to the last nonzero amplitude
        self.amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
    }

    /// `index,re,im` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im\n");
        for (i, a) in self.amps.iter().enumerate() {
            let _ = writeln!(out, "{i},{:?},{:?}", a.re, a.im);
        }
        out
    }
}
