//! Local cost `C_L = 1/2 − μ/(2nω)` as weighted sums of Pauli expectations.
//!
//! With `A = Σ c_i A_i` and `U = Σ u_l U_l`,
//!
//! * `ω = Σ_ij c_i c̄_j ⟨A_j A_i⟩`
//! * `μ = Σ_r Σ_ijlp c_i c̄_j u_p ū_l ⟨A_j U_p Z_r U_l A_i⟩`
//!
//! Every term has a conjugate partner with swapped indices, so pairs are
//! folded into one real coefficient and each table holds real weights.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum, Phase, DEFAULT_DROP_TOL};
use crate::shadow::PauliEstimator;
use crate::state::StateVector;

/// `ω` below this is treated as a vanishing denominator.
pub const OMEGA_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostValue {
    pub cost: f64,
    pub mu: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostTermTable {
    n: usize,
    mu_terms: Vec<(f64, PauliString)>,
    omega_terms: Vec<(f64, PauliString)>,
    preprocessed: bool,
    raw_count: usize,
}

/// Distinct strings of a table with their combined `μ` and `ω` weights.
#[derive(Clone, Debug)]
pub struct Observables {
    pub n: usize,
    pub strings: Vec<PauliString>,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
}

fn chain(ops: &[&PauliString]) -> (Phase, PauliString) {
    let mut phase = Phase::ONE;
    let mut acc = *ops[0];
    for p in &ops[1..] {
        let (ph, r) = acc.compose(p);
        phase = phase * ph;
        acc = r;
    }
    (phase, acc)
}

fn check_system(a: &PauliSum, u: &PauliSum) -> Result<()> {
    if a.num_qubits() != u.num_qubits() {
        return Err(Error::Dimension {
            expected: a.num_qubits(),
            found: u.num_qubits(),
        });
    }
    if a.is_empty() {
        return Err(invalid("matrix A has no terms"));
    }
    if u.is_empty() {
        return Err(invalid("state preparation U has no terms"));
    }
    Ok(())
}

/// Real part of a folded pair: `Re(z)` on the diagonal, `2 Re(z)` otherwise.
#[inline]
fn fold(z: Complex64, diagonal: bool) -> f64 {
    if diagonal {
        z.re
    } else {
        2.0 * z.re
    }
}

impl CostTermTable {
    /// Enumerates every `β_ij` and `δ_ijlp^r` product with conjugate pairs
    /// folded, without merging equal strings.
    pub fn build(a: &PauliSum, u: &PauliSum) -> Result<Self> {
        check_system(a, u)?;
        let n = a.num_qubits();
        let at = a.terms();
        let ut = u.terms();

        let mut omega_terms = Vec::with_capacity(at.len() * (at.len() + 1) / 2);
        for i in 0..at.len() {
            for j in i..at.len() {
                let (ci, ai) = at[i];
                let (cj, aj) = at[j];
                let (ph, s) = chain(&[&aj, &ai]);
                omega_terms.push((fold(ci * cj.conj() * ph.to_complex(), i == j), s));
            }
        }

        // composite index (i, l) on the right, (j, p) on the left
        let idx: Vec<(usize, usize)> = (0..at.len())
            .flat_map(|i| (0..ut.len()).map(move |l| (i, l)))
            .collect();

        let mut mu_terms = Vec::with_capacity(n * idx.len() * (idx.len() + 1) / 2);
        for r in 0..n {
            let zr = PauliString::single(n, r, Pauli::Z)?;
            for (x, &(i, l)) in idx.iter().enumerate() {
                for &(j, p) in &idx[x..] {
                    let (ci, ai) = at[i];
                    let (cj, aj) = at[j];
                    let (ul_c, ul) = ut[l];
                    let (up_c, up) = ut[p];
                    let (ph, s) = chain(&[&aj, &up, &zr, &ul, &ai]);
                    let coef = ci * cj.conj() * up_c * ul_c.conj() * ph.to_complex();
                    mu_terms.push((fold(coef, (i, l) == (j, p)), s));
                }
            }
        }

        let raw_count = mu_terms.len() + omega_terms.len();
        Ok(CostTermTable {
            n,
            mu_terms,
            omega_terms,
            preprocessed: false,
            raw_count,
        })
    }

    /// Builds the already-merged table directly. `U Z_r U†` is reduced to a
    /// Pauli sum `W_r` first, so the work scales with `n · |W_r| · L²`
    /// instead of `n · L² · L_U²`.
    pub fn build_preprocessed(a: &PauliSum, u: &PauliSum, tol: f64) -> Result<Self> {
        check_system(a, u)?;
        let n = a.num_qubits();
        let at = a.terms();

        let mut omega: HashMap<PauliString, f64> = HashMap::new();
        for i in 0..at.len() {
            for j in i..at.len() {
                let (ci, ai) = at[i];
                let (cj, aj) = at[j];
                let (ph, s) = chain(&[&aj, &ai]);
                *omega.entry(s).or_default() += fold(ci * cj.conj() * ph.to_complex(), i == j);
            }
        }

        let udag = u.adjoint();
        let mut mu: HashMap<PauliString, f64> = HashMap::new();
        for r in 0..n {
            let zr = PauliSum::from_terms(n, [(Complex64::new(1.0, 0.0), PauliString::single(n, r, Pauli::Z)?)])?;
            let w = u.compose(&zr)?.compose(&udag)?;
            for &(wc, ws) in w.terms() {
                if wc.im.abs() > 1e-9 * wc.norm().max(1.0) {
                    return Err(invalid(format!(
                        "U Z_{r} U† has a non-real weight {wc} on {ws}; U is not unitary"
                    )));
                }
                for i in 0..at.len() {
                    for j in i..at.len() {
                        let (ci, ai) = at[i];
                        let (cj, aj) = at[j];
                        let (ph, s) = chain(&[&aj, &ws, &ai]);
                        let z = ci * cj.conj() * wc.re * ph.to_complex();
                        *mu.entry(s).or_default() += fold(z, i == j);
                    }
                }
            }
        }

        let l = at.len();
        let m = l * u.len();
        let raw_count = l * (l + 1) / 2 + n * m * (m + 1) / 2;
        Ok(CostTermTable {
            n,
            mu_terms: finish_list(mu, tol),
            omega_terms: finish_list(omega, tol),
            preprocessed: true,
            raw_count,
        })
    }

    /// Merges equal strings within each list and drops weights `≤ tol`.
    pub fn preprocess(&self, tol: f64) -> CostTermTable {
        let merge = |terms: &[(f64, PauliString)]| {
            let mut acc: HashMap<PauliString, f64> = HashMap::new();
            for &(c, s) in terms {
                *acc.entry(s).or_default() += c;
            }
            finish_list(acc, tol)
        };
        CostTermTable {
            n: self.n,
            mu_terms: merge(&self.mu_terms),
            omega_terms: merge(&self.omega_terms),
            preprocessed: true,
            raw_count: self.raw_count,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn mu_terms(&self) -> &[(f64, PauliString)] {
        &self.mu_terms
    }

    pub fn omega_terms(&self) -> &[(f64, PauliString)] {
        &self.omega_terms
    }

    pub fn is_preprocessed(&self) -> bool {
        self.preprocessed
    }

    /// Entries currently held across both lists.
    pub fn n_pp(&self) -> usize {
        self.mu_terms.len() + self.omega_terms.len()
    }

    /// Entries of the folded table before any merging.
    pub fn raw_count(&self) -> usize {
        self.raw_count
    }

    /// Distinct strings across both lists with merged weights, sorted.
    pub fn observables(&self) -> Observables {
        let mut map: BTreeMap<PauliString, (f64, f64)> = BTreeMap::new();
        for &(c, s) in &self.mu_terms {
            map.entry(s).or_default().0 += c;
        }
        for &(c, s) in &self.omega_terms {
            map.entry(s).or_default().1 += c;
        }
        let mut obs = Observables {
            n: self.n,
            strings: Vec::with_capacity(map.len()),
            mu: Vec::with_capacity(map.len()),
            omega: Vec::with_capacity(map.len()),
        };
        for (s, (m, w)) in map {
            obs.strings.push(s);
            obs.mu.push(m);
            obs.omega.push(w);
        }
        obs
    }

    /// Exact `C_L` on a state.
    pub fn evaluate_exact(&self, x: &StateVector) -> Result<CostValue> {
        self.observables().evaluate_exact(x)
    }

    /// `C_L` from any estimator, each distinct string estimated once.
    pub fn evaluate(&self, est: &dyn PauliEstimator) -> Result<CostValue> {
        self.observables().evaluate(est)
    }

    /// `[mu]` and `[omega]` sections in the Pauli-sum text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, terms) in [("mu", &self.mu_terms), ("omega", &self.omega_terms)] {
            let _ = writeln!(out, "[{name}]");
            for (c, s) in terms.iter() {
                let _ = writeln!(out, "{c:?} 0.0 {s}");
            }
        }
        out
    }
}

fn finish_list(acc: HashMap<PauliString, f64>, tol: f64) -> Vec<(f64, PauliString)> {
    let mut v: Vec<(f64, PauliString)> = acc
        .into_iter()
        .filter(|(_, c)| c.abs() > tol)
        .map(|(s, c)| (c, s))
        .collect();
    v.sort_by(|a, b| a.1.cmp(&b.1));
    v
}

impl Observables {
    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Distinct non-identity strings, the `M` of the shadow budget.
    pub fn estimated_count(&self) -> usize {
        self.strings.iter().filter(|s| !s.is_identity()).count()
    }

    pub fn max_locality(&self) -> usize {
        self.strings.iter().map(|s| s.locality()).max().unwrap_or(0)
    }

    /// `(μ, ω)` from per-string expectations in `strings` order.
    pub fn combine(&self, values: &[f64]) -> (f64, f64) {
        let mut mu = 0.0;
        let mut omega = 0.0;
        for ((v, m), w) in values.iter().zip(&self.mu).zip(&self.omega) {
            mu += m * v;
            omega += w * v;
        }
        (mu, omega)
    }

    pub fn exact_values(&self, x: &StateVector) -> Result<Vec<f64>> {
        let dim = x.dim();
        if x.num_qubits() == self.n && self.strings.len() * 2 > dim * (self.n + 1) {
            let table = x.all_pauli_expectations();
            return Ok(self
                .strings
                .iter()
                .map(|s| table[((s.x_mask() << self.n) | s.z_mask()) as usize])
                .collect());
        }
        self.strings.iter().map(|s| x.expectation(s)).collect()
    }

    pub fn evaluate_exact(&self, x: &StateVector) -> Result<CostValue> {
        let values = self.exact_values(x)?;
        let (mu, omega) = self.combine(&values);
        if omega <= OMEGA_FLOOR {
            return Err(Error::Singular(format!("omega = {omega:e} on the given state")));
        }
        let cost = cost_from(self.n, mu, omega);
        if !(-1e-9..=1.0 + 1e-9).contains(&cost) {
            return Err(invalid(format!(
                "exact cost {cost} outside [0, 1]; A or U breaks the problem contract"
            )));
        }
        Ok(CostValue { cost, mu, omega })
    }

    pub fn evaluate(&self, est: &dyn PauliEstimator) -> Result<CostValue> {
        if est.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: est.num_qubits(),
            });
        }
        let values = self
            .strings
            .iter()
            .map(|s| est.estimate(s))
            .collect::<Result<Vec<_>>>()?;
        let (mu, omega) = self.combine(&values);
        if omega <= 0.0 {
            return Err(Error::UnstableDenominator(omega));
        }
        Ok(CostValue {
            cost: cost_from(self.n, mu, omega),
            mu,
            omega,
        })
    }
}

#[inline]
pub fn cost_from(n: usize, mu: f64, omega: f64) -> f64 {
    0.5 - mu / (2.0 * n as f64 * omega)
}

/// `ε² / (n κ²)`.
pub fn termination_gamma(n: usize, kappa: f64, eps: f64) -> Result<f64> {
    if n == 0 || !(kappa > 0.0) || !(eps > 0.0) {
        return Err(invalid("gamma needs positive n, kappa and eps"));
    }
    Ok(eps * eps / (n as f64 * kappa * kappa))
}

/// The default merge tolerance for [`CostTermTable::preprocess`].
pub const PREPROCESS_TOL: f64 = DEFAULT_DROP_TOL;

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn sum(n: usize, terms: &[(f64, &str)]) -> PauliSum {
        PauliSum::from_terms(n, terms.iter().map(|&(c, s)| (Complex64::new(c, 0.0), ps(s)))).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert!((termination_gamma(4, 60.0, 0.01).unwrap() - 6.944444e-9).abs() < 1e-14);
        assert_eq!(termination_gamma(1, 1.0, 1.0).unwrap(), 1.0);
        assert!((termination_gamma(4, 10.0, 0.1).unwrap() - 2.5e-5).abs() < 1e-15);
        assert!(termination_gamma(4, 0.0, 0.1).is_err());
    }

    #[test]
    fn identity_system_single_qubit() {
        let t = CostTermTable::build(&sum(1, &[(1.0, "I")]), &sum(1, &[(1.0, "I")])).unwrap();
        let zero = StateVector::zero_state(1).unwrap();
        let one = StateVector::basis_state(1, 1).unwrap();
        assert!(t.evaluate_exact(&zero).unwrap().cost.abs() < 1e-15);
        let v = t.evaluate_exact(&one).unwrap();
        assert_eq!((v.mu, v.omega, v.cost), (-1.0, 1.0, 1.0));
    }

    #[test]
    fn omega_entry_count_and_diagonal() {
        let a = sum(2, &[(0.5, "ZI"), (0.25, "XX"), (-0.1, "IY")]);
        let t = CostTermTable::build(&a, &sum(2, &[(1.0, "II")])).unwrap();
        assert_eq!(t.omega_terms().len(), 6);
        let diag: f64 = t
            .omega_terms()
            .iter()
            .filter(|(_, s)| s.is_identity())
            .map(|(c, _)| c)
            .sum();
        assert!((diag - (0.25 + 0.0625 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn preprocess_merges_duplicates_and_is_idempotent() {
        let a = sum(2, &[(0.5, "ZI"), (0.3, "IZ"), (0.2, "ZZ")]);
        let u = sum(2, &[(1.0, "II")]);
        let t = CostTermTable::build(&a, &u).unwrap();
        let p = t.preprocess(PREPROCESS_TOL);
        assert!(p.n_pp() < t.n_pp());
        assert_eq!(p.preprocess(PREPROCESS_TOL), p);
        let x = StateVector::from_real(&[0.6, 0.0, 0.8, 0.0]).unwrap();
        let before = t.evaluate_exact(&x).unwrap().cost;
        let after = p.evaluate_exact(&x).unwrap().cost;
        assert!((before - after).abs() < 1e-14);
    }

    #[test]
    fn streaming_build_matches_merged_enumeration() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = sum(2, &[(0.5, "ZI"), (0.2, "XY"), (0.3, "II")]);
        let u = sum(2, &[(h, "XI"), (h, "ZI")]);
        let slow = CostTermTable::build(&a, &u).unwrap().preprocess(1e-12);
        let fast = CostTermTable::build_preprocessed(&a, &u, 1e-12).unwrap();
        assert_eq!(slow.mu_terms().len(), fast.mu_terms().len());
        for ((c1, s1), (c2, s2)) in slow.mu_terms().iter().zip(fast.mu_terms()) {
            assert_eq!(s1, s2);
            assert!((c1 - c2).abs() < 1e-12);
        }
        assert_eq!(slow.omega_terms(), fast.omega_terms());
        assert_eq!(slow.raw_count(), fast.raw_count());
    }

    #[test]
    fn empty_a_is_rejected() {
        let a = PauliSum::new(1);
        assert!(CostTermTable::build(&a, &sum(1, &[(1.0, "I")])).is_err());
    }

    #[test]
    fn dump_has_both_sections() {
        let t = CostTermTable::build(&sum(1, &[(1.0, "Z")]), &sum(1, &[(1.0, "I")])).unwrap();
        let text = t.to_text();
        assert!(text.starts_with("[mu]\n"));
        assert!(text.contains("[omega]\n1.0 0.0 I\n"));
    }
}
