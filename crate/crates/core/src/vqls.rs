//! Hadamard-test baseline and circuit-count models.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::ansatz::AnsatzCircuit;
use crate::cost::{cost_from, CostValue, OMEGA_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::shadow::shadow_size;
use crate::state::{Gate, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    Real,
    Imag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JobKind {
    /// `⟨A_j A_i⟩`
    Beta { i: usize, j: usize },
    /// `⟨A_j W A_i⟩` with `W` term `t` of `U Z_r U†`; `r` counts from 0.
    Delta { i: usize, j: usize, r: usize, t: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HadamardJob {
    pub kind: JobKind,
    pub part: Part,
    pub shots: u64,
}

/// Exact probability of reading 0 on the ancilla of a Hadamard test whose
/// controlled operations are `ops`, applied first to last.
pub fn hadamard_p0(x: &StateVector, ops: &[PauliString], part: Part) -> Result<f64> {
    let n = x.num_qubits();
    for p in ops {
        if p.num_qubits() != n {
            return Err(Error::Dimension {
                expected: n,
                found: p.num_qubits(),
            });
        }
    }
    // ancilla is qubit n, the least significant bit
    let amps: Vec<Complex64> = x
        .amplitudes()
        .iter()
        .flat_map(|&a| [a, Complex64::new(0.0, 0.0)])
        .collect();
    let mut s = StateVector::from_amplitudes(amps)?;
    s.apply(&Gate::H(n))?;
    if part == Part::Imag {
        s.apply(&Gate::Sdg(n))?;
    }
    for p in ops {
        s.apply(&Gate::ControlledPauli {
            control: n,
            string: p.padded(1)?,
        })?;
    }
    s.apply(&Gate::H(n))?;
    let p0: f64 = s.amplitudes().iter().step_by(2).map(|a| a.norm_sqr()).sum();
    Ok(p0.clamp(0.0, 1.0))
}

/// `2k/shots − 1` with `k ~ Binomial(shots, P0)`, an unbiased estimate of
/// `Re` or `Im` of `⟨x|W|x⟩` for `W = ops[last] ⋯ ops[0]`.
pub fn hadamard_test<R: Rng + ?Sized>(
    x: &StateVector,
    ops: &[PauliString],
    part: Part,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    let p0 = hadamard_p0(x, ops, part)?;
    let k = Binomial::new(shots, p0)
        .map_err(|e| invalid(format!("binomial({shots}, {p0}): {e}")))?
        .sample(rng);
    Ok(2.0 * k as f64 / shots as f64 - 1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn hadamard_beta<R: Rng + ?Sized>(
    circuit: &AnsatzCircuit,
    params: &[f64],
    a_i: &PauliString,
    a_j: &PauliString,
    shots: u64,
    rng: &mut R,
    part: Part,
) -> Result<f64> {
    let x = circuit.prepare_state(params)?;
    hadamard_test(&x, &[*a_i, *a_j], part, shots, rng)
}

/// Estimates `δ_ijlp^r = ⟨A_j U_p Z_r U_l A_i⟩` with five controlled
/// operations; `r` counts from 0.
#[allow(clippy::too_many_arguments)]
pub fn hadamard_delta<R: Rng + ?Sized>(
    circuit: &AnsatzCircuit,
    params: &[f64],
    a_i: &PauliString,
    a_j: &PauliString,
    u_l: &PauliString,
    u_p: &PauliString,
    r: usize,
    shots: u64,
    rng: &mut R,
    part: Part,
) -> Result<f64> {
    let n = circuit.num_qubits();
    let zr = PauliString::single(n, r, Pauli::Z)?;
    let x = circuit.prepare_state(params)?;
    hadamard_test(&x, &[*a_i, *u_l, zr, *u_p, *a_j], part, shots, rng)
}

/// `U Z_r U†` for every qubit, simplified. Each is Hermitian, so the weights
/// are real.
pub fn conjugated_z(u: &PauliSum) -> Result<Vec<Vec<(f64, PauliString)>>> {
    let n = u.num_qubits();
    let udag = u.adjoint();
    (0..n)
        .map(|r| {
            let zr = PauliSum::from_terms(n, [(Complex64::new(1.0, 0.0), PauliString::single(n, r, Pauli::Z)?)])?;
            let w = u.compose(&zr)?.compose(&udag)?;
            w.terms()
                .iter()
                .map(|&(c, s)| {
                    if c.im.abs() > 1e-9 * c.norm().max(1.0) {
                        Err(invalid(format!("U Z_{r} U† has non-real weight {c} on {s}")))
                    } else {
                        Ok((c.re, s))
                    }
                })
                .collect()
        })
        .collect()
}

/// The job list for one cost evaluation. `β_ii = 1` needs no circuit,
/// `β_ji = conj(β_ij)` and the `δ` pairs fold to real parts, so only
/// `i < j` for `β` and `i ≤ j` for `δ` are run. Imaginary parts are
/// scheduled only where a complex coefficient can pick them up, or always
/// with `paranoid`.
pub fn plan_jobs(a: &PauliSum, w: &[Vec<(f64, PauliString)>], shots: u64, paranoid: bool) -> Vec<HadamardJob> {
    let at = a.terms();
    let mut jobs = Vec::new();
    let mut push = |kind, coef: Complex64| {
        jobs.push(HadamardJob {
            kind,
            part: Part::Real,
            shots,
        });
        if paranoid || coef.im != 0.0 {
            jobs.push(HadamardJob {
                kind,
                part: Part::Imag,
                shots,
            });
        }
    };
    for i in 0..at.len() {
        for j in i + 1..at.len() {
            push(JobKind::Beta { i, j }, at[i].0 * at[j].0.conj());
        }
    }
    for (r, wr) in w.iter().enumerate() {
        for t in 0..wr.len() {
            for i in 0..at.len() {
                for j in i..at.len() {
                    push(JobKind::Delta { i, j, r, t }, at[i].0 * at[j].0.conj());
                }
            }
        }
    }
    jobs
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VqlsEvaluation {
    pub value: CostValue,
    pub jobs: usize,
    pub circuits: u64,
}

/// Hadamard-test estimate of `C_L` at `params`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cost_vqls<R: Rng + ?Sized>(
    a: &PauliSum,
    u: &PauliSum,
    circuit: &AnsatzCircuit,
    params: &[f64],
    shots: u64,
    paranoid: bool,
    rng: &mut R,
) -> Result<VqlsEvaluation> {
    let n = a.num_qubits();
    if u.num_qubits() != n || circuit.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            found: if u.num_qubits() != n { u.num_qubits() } else { circuit.num_qubits() },
        });
    }
    let x = circuit.prepare_state(params)?;
    let w = conjugated_z(u)?;
    let jobs = plan_jobs(a, &w, shots, paranoid);
    let at = a.terms();

    let mut omega: f64 = at.iter().map(|(c, _)| c.norm_sqr()).sum();
    let mut mu = 0.0;
    for job in &jobs {
        let (coef, ops, fold, target) = match job.kind {
            JobKind::Beta { i, j } => (at[i].0 * at[j].0.conj(), vec![at[i].1, at[j].1], 2.0, &mut omega),
            JobKind::Delta { i, j, r, t } => {
                let (wc, ws) = w[r][t];
                let fold = if i == j { 1.0 } else { 2.0 };
                (at[i].0 * at[j].0.conj() * wc, vec![at[i].1, ws, at[j].1], fold, &mut mu)
            }
        };
        let est = hadamard_test(&x, &ops, job.part, job.shots, rng)?;
        // 2 Re(z·e) = 2 (Re z Re e − Im z Im e)
        *target += match job.part {
            Part::Real => fold * coef.re * est,
            Part::Imag => -fold * coef.im * est,
        };
    }
    if omega <= OMEGA_FLOOR {
        return Err(Error::UnstableDenominator(omega));
    }
    Ok(VqlsEvaluation {
        value: CostValue {
            cost: cost_from(n, mu, omega),
            mu,
            omega,
        },
        jobs: jobs.len(),
        circuits: jobs.iter().map(|j| j.shots).sum(),
    })
}

fn term_count(l: u64, n: u64) -> f64 {
    (l * l.saturating_sub(1) + n * l * l) as f64
}

/// `(shots/2)·(L(L−1) + nL²)`, rounded up.
pub fn circuits_per_step_vqls(l: u64, n: u64, shots: u64) -> u128 {
    (shots as f64 / 2.0 * term_count(l, n)).ceil() as u128
}

/// `log2(L(L−1) + nL²)·3^(2k+1)/eps²`, rounded up.
pub fn circuits_per_step_sqls(l: u64, n: u64, k: u32, eps: f64) -> Result<u128> {
    if !(eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let m = term_count(l, n).max(1.0);
    Ok((m.log2() * 3f64.powi(2 * k as i32 + 1) / (eps * eps)).ceil() as u128)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CountMode {
    Hadamard { shots: u64 },
    Shadow { k: u32, eps: f64 },
}

/// Circuits per step once the term tables hold `n_pp` entries.
pub fn circuits_per_step_preprocessed(n_pp: u64, mode: CountMode) -> Result<u128> {
    if n_pp == 0 {
        return Err(invalid("N_PP must be at least 1"));
    }
    match mode {
        CountMode::Hadamard { shots } => Ok(n_pp as u128 * shots as u128),
        CountMode::Shadow { k, eps } => {
            Ok(shadow_size(n_pp as usize, 2 * k as usize + 1, eps, 1.0)? as u128)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn vqls_counts() {
        assert_eq!(circuits_per_step_vqls(4, 4, 10_000), 380_000);
        assert_eq!(circuits_per_step_vqls(1, 1, 2), 1);
        let big = circuits_per_step_vqls(2500, 50, 10_000) as f64;
        assert!((big / 1.594e12 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn sqls_counts() {
        let a = circuits_per_step_sqls(4, 50, 2, 0.01).unwrap() as f64;
        assert!((a / 2.35e7 - 1.0).abs() < 5e-3);
        let b = circuits_per_step_sqls(2500, 50, 2, 0.01).unwrap() as f64;
        assert!((b / 6.86e7 - 1.0).abs() < 5e-3);
        let c = circuits_per_step_sqls(4, 4, 0, 0.1).unwrap();
        assert_eq!(c, (((12.0 + 64.0f64).log2()) * 3.0 / 0.01).ceil() as u128);
    }

    #[test]
    fn preprocessed_counts() {
        assert_eq!(circuits_per_step_preprocessed(10, CountMode::Hadamard { shots: 100 }).unwrap(), 1000);
        assert_eq!(
            circuits_per_step_preprocessed(76, CountMode::Shadow { k: 2, eps: 0.01 }).unwrap(),
            shadow_size(76, 5, 0.01, 1.0).unwrap() as u128
        );
    }

    #[test]
    fn p0_of_simple_cases() {
        let x = StateVector::zero_state(1).unwrap();
        // ⟨0|Z|0⟩ = 1 → P0 = 1
        assert!((hadamard_p0(&x, &[ps("Z")], Part::Real).unwrap() - 1.0).abs() < 1e-15);
        // ⟨0|X|0⟩ = 0 → P0 = 1/2
        assert!((hadamard_p0(&x, &[ps("X")], Part::Real).unwrap() - 0.5).abs() < 1e-15);
        // X then Z: W = Z X = iY, ⟨0|iY|0⟩ = 0
        assert!((hadamard_p0(&x, &[ps("X"), ps("Z")], Part::Imag).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn imaginary_part_of_complex_product() {
        // W = X·Y = iZ, so ⟨0|W|0⟩ = i
        let x = StateVector::zero_state(1).unwrap();
        let p0 = hadamard_p0(&x, &[ps("Y"), ps("X")], Part::Imag).unwrap();
        assert!((2.0 * p0 - 1.0 - 1.0).abs() < 1e-14);
        let p0 = hadamard_p0(&x, &[ps("Y"), ps("X")], Part::Real).unwrap();
        assert!((2.0 * p0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beta_on_diagonal_is_one() {
        let c = AnsatzCircuit::hardware_efficient(2, 1).unwrap();
        let params: Vec<f64> = (0..c.param_count()).map(|k| 0.1 * k as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = hadamard_beta(&c, &params, &ps("XZ"), &ps("XZ"), 1000, &mut rng, Part::Real).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn job_plan_for_real_single_string_u() {
        let a = PauliSum::from_terms(
            2,
            ["ZI", "IX", "XX"].iter().map(|s| (Complex64::new(0.3, 0.0), ps(s))),
        )
        .unwrap();
        let u = PauliSum::from_terms(2, [(Complex64::new(1.0, 0.0), ps("XX"))]).unwrap();
        let w = conjugated_z(&u).unwrap();
        let jobs = plan_jobs(&a, &w, 10, false);
        // 3 beta pairs + 2 qubits × 6 delta pairs
        assert_eq!(jobs.len(), 3 + 12);
        assert_eq!(plan_jobs(&a, &w, 10, true).len(), 30);
    }
}
