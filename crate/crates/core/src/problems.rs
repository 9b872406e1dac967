//! Benchmark linear systems and the four-unitary matrix split.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::ComplexMatrix;
use crate::pauli::{decompose_dense, Pauli, PauliString, PauliSum, DEFAULT_DROP_TOL};
use crate::state::StateVector;

pub const IQLSP_TEXT: &str = include_str!("../data/iqlsp.pauli");
pub const RQLSP1_TEXT: &str = include_str!("../data/rqlsp1.pauli");
pub const RQLSP2_TEXT: &str = include_str!("../data/rqlsp2.pauli");

/// Printed entries of the 16×16 potential-grid system.
pub const PGLS_DIAG: f64 = 0.22941573;
pub const PGLS_OFF: f64 = -0.05735393;

/// Tolerance of the `‖A‖₂ ≤ 1` and unitarity checks.
pub const INVARIANT_TOL: f64 = 1e-9;

const PROBLEM_NAMES: &[&str] = &[
    "iqlsp", "rqlsp1", "rqlsp2", "pgls", "laplace4", "laplace16", "identity", "ising", "random",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub label: String,
    pub n: usize,
    pub kappa: f64,
    pub norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Multiplier applied to the integer grid stencil.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_scale: Option<f64>,
    /// Euclidean norm of the right-hand side before normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stencil: Option<Stencil>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A system `A|x⟩ ∝ |b⟩` with `|b⟩ = U|0⟩` and its dense reference solution.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub a: PauliSum,
    pub u: PauliSum,
    pub b: StateVector,
    pub exact_solution: StateVector,
    pub meta: ProblemMeta,
    a_dense: ComplexMatrix,
}

impl LinearProblem {
    /// Builds the dense quantities from the two Pauli sums. `U` must be
    /// unitary; the `‖A‖₂ ≤ 1` assumption is only reported by
    /// [`LinearProblem::invariant_violations`].
    pub fn new(label: &str, a: PauliSum, u: PauliSum) -> Result<Self> {
        if a.num_qubits() != u.num_qubits() {
            return Err(Error::Dimension {
                expected: a.num_qubits(),
                found: u.num_qubits(),
            });
        }
        let n = a.num_qubits();
        let a_dense = a.to_dense()?;
        let u_dense = u.to_dense()?;
        let err = u_dense.unitarity_error();
        if err > INVARIANT_TOL {
            return Err(invalid(format!("U is not unitary (max |UU† − I| = {err:e})")));
        }
        let b = StateVector::from_amplitudes((0..u_dense.dim()).map(|r| u_dense.get(r, 0)).collect())?;
        let x = a_dense.solve(b.amplitudes())?;
        let exact_solution = StateVector::from_amplitudes(x)?.normalized()?;
        let sv = a_dense.singular_values();
        let (hi, lo) = (sv[0], *sv.last().expect("nonempty spectrum"));
        if lo <= 0.0 {
            return Err(Error::Singular(format!("{label}: smallest singular value is zero")));
        }
        Ok(LinearProblem {
            a,
            u,
            b,
            exact_solution,
            meta: ProblemMeta {
                label: label.to_string(),
                n,
                kappa: hi / lo,
                norm: hi,
                ..Default::default()
            },
            a_dense,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.meta.n
    }

    pub fn kappa(&self) -> f64 {
        self.meta.kappa
    }

    pub fn label(&self) -> &str {
        &self.meta.label
    }

    pub fn a_dense(&self) -> &ComplexMatrix {
        &self.a_dense
    }

    /// Human-readable list of broken problem invariants (empty when all hold).
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.meta.norm > 1.0 + INVARIANT_TOL {
            out.push(format!("spectral norm {} exceeds 1", self.meta.norm));
        }
        if let Ok(ax) = self.exact_solution.apply_matrix(&self.a_dense) {
            if let Ok(ax) = ax.normalized() {
                let overlap = ax.inner(&self.b).map(|z| z.norm()).unwrap_or(0.0);
                let resid = (2.0 - 2.0 * overlap).max(0.0).sqrt();
                if resid > INVARIANT_TOL.sqrt() {
                    out.push(format!("solution residual {resid:e}"));
                }
            }
        }
        out
    }

    /// Writes `A.pauli`, `U.pauli` and `meta.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("A.pauli"), self.a.to_text())?;
        fs::write(dir.join("U.pauli"), self.u.to_text())?;
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    /// Reads a directory written by [`LinearProblem::write_dir`]. Stored
    /// metadata is kept except for the recomputed `n`, `kappa` and `norm`.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let a = PauliSum::parse_text(&fs::read_to_string(dir.join("A.pauli"))?)?;
        let u = PauliSum::parse_text(&fs::read_to_string(dir.join("U.pauli"))?)?;
        let meta_path = dir.join("meta.json");
        let stored: Option<ProblemMeta> = if meta_path.exists() {
            Some(serde_json::from_str(&fs::read_to_string(meta_path)?)?)
        } else {
            None
        };
        let label = stored
            .as_ref()
            .map(|m| m.label.clone())
            .unwrap_or_else(|| dir.display().to_string());
        let mut p = LinearProblem::new(&label, a, u)?;
        if let Some(m) = stored {
            p.meta = ProblemMeta {
                n: p.meta.n,
                kappa: p.meta.kappa,
                norm: p.meta.norm,
                ..m
            };
        }
        Ok(p)
    }
}

fn real(c: f64) -> Complex64 {
    Complex64::new(c, 0.0)
}

/// `⊗_q (H if q ∈ targets else I)` as a Pauli sum.
pub fn hadamard_layer(n: usize, targets: &[usize]) -> Result<PauliSum> {
    let mut acc = PauliSum::identity(n, real(1.0));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for &q in targets {
        let hq = PauliSum::from_terms(
            n,
            [
                (real(h), PauliString::single(n, q, Pauli::X)?),
                (real(h), PauliString::single(n, q, Pauli::Z)?),
            ],
        )?;
        acc = acc.compose(&hq)?;
    }
    Ok(acc)
}

fn all_hadamards(n: usize) -> Result<PauliSum> {
    hadamard_layer(n, &(0..n).collect::<Vec<_>>())
}

/// The verbatim Ising-inspired 4-qubit fixture with `U = H^⊗4`.
pub fn ising_problem() -> Result<LinearProblem> {
    let a = PauliSum::parse_text(IQLSP_TEXT)?;
    LinearProblem::new("iqlsp", a, all_hadamards(4)?)
}

pub fn rqlsp1() -> Result<LinearProblem> {
    LinearProblem::new("rqlsp1", PauliSum::parse_text(RQLSP1_TEXT)?, all_hadamards(4)?)
}

pub fn rqlsp2() -> Result<LinearProblem> {
    LinearProblem::new("rqlsp2", PauliSum::parse_text(RQLSP2_TEXT)?, all_hadamards(4)?)
}

/// `Σ_j X_j + J Σ_j Z_j Z_{j+1}` without shift or scale.
pub fn ising_base(n: usize, coupling: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(invalid(format!("Ising family needs n ≥ 2, got {n}")));
    }
    let mut s = PauliSum::new(n);
    for j in 0..n {
        s.push(real(1.0), PauliString::single(n, j, Pauli::X)?)?;
    }
    for j in 0..n - 1 {
        let (_, zz) = PauliString::single(n, j, Pauli::Z)?.multiply(&PauliString::single(n, j + 1, Pauli::Z)?)?;
        s.push(real(coupling), zz)?;
    }
    Ok(s)
}

/// `(base + η I) / ζ`, simplified.
pub fn shift_scale(base: &PauliSum, eta: f64, zeta: f64) -> Result<PauliSum> {
    let n = base.num_qubits();
    Ok(base
        .add(&PauliSum::identity(n, real(eta)))?
        .scale(real(1.0 / zeta))
        .simplify(DEFAULT_DROP_TOL))
}

/// `A = (Σ X_j + J Σ Z_j Z_{j+1} + η I)/ζ` and `U = H^⊗n`.
pub fn ising_family(n: usize, coupling: f64, eta: f64, zeta: f64) -> Result<LinearProblem> {
    let a = shift_scale(&ising_base(n, coupling)?, eta, zeta)?;
    let mut p = LinearProblem::new("ising", a, all_hadamards(n)?)?;
    p.meta.eta = Some(eta);
    p.meta.zeta = Some(zeta);
    p.meta.coupling = Some(coupling);
    Ok(p)
}

/// The Ising family with `(η, ζ)` tuned to a target condition number.
pub fn ising_tuned(n: usize, coupling: f64, kappa: f64) -> Result<LinearProblem> {
    let (eta, zeta) = tune_kappa(&ising_base(n, coupling)?, kappa)?;
    ising_family(n, coupling, eta, zeta)
}

/// `L` distinct random `k`-local strings with weights uniform in `[-1, 1]`,
/// shifted and scaled to the target condition number with `‖A‖₂ = 1`.
pub fn random_problem<R: Rng + ?Sized>(
    n: usize,
    l: usize,
    k: usize,
    kappa_target: f64,
    rng: &mut R,
) -> Result<LinearProblem> {
    let base = random_pauli_sum(n, l, k, rng)?;
    let (eta, zeta) = tune_kappa(&base, kappa_target)?;
    let mut p = LinearProblem::new("random", shift_scale(&base, eta, zeta)?, all_hadamards(n)?)?;
    p.meta.eta = Some(eta);
    p.meta.zeta = Some(zeta);
    Ok(p)
}

/// `L` distinct `k`-local strings with real weights uniform in `[-1, 1]`.
pub fn random_pauli_sum<R: Rng + ?Sized>(n: usize, l: usize, k: usize, rng: &mut R) -> Result<PauliSum> {
    if l == 0 || k == 0 || k > n {
        return Err(invalid(format!("need L ≥ 1 and 1 ≤ k ≤ n, got L={l}, k={k}, n={n}")));
    }
    let available = binomial(n, k) * 3f64.powi(k as i32);
    if l as f64 > available {
        return Err(invalid(format!("only {available} distinct {k}-local strings on {n} qubits")));
    }
    let mut seen = std::collections::HashSet::new();
    let mut s = PauliSum::new(n);
    while s.len() < l {
        let mut letters = vec![Pauli::I; n];
        for q in sample(rng, n, k) {
            letters[q] = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
        }
        let p = PauliString::from_letters(&letters)?;
        if seen.insert(p) {
            s.push(real(rng.random_range(-1.0..=1.0)), p)?;
        }
    }
    Ok(s)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shift `η` and scale `ζ` with `κ((base + ηI)/ζ) = target` and
/// `‖(base + ηI)/ζ‖₂ = 1`.
///
/// For a Hermitian base the spectrum is computed once and `κ(η)` is
/// monotone on `η > −λ_min`, so plain bisection applies. Other bases are
/// handled with an SVD per probe and need a sign change in the bracket.
pub fn tune_kappa(base: &PauliSum, target: f64) -> Result<(f64, f64)> {
    if !(target > 1.0) || !target.is_finite() {
        return Err(Error::Bracket(format!(
            "condition number {target} is unreachable by a finite shift"
        )));
    }
    let m = base.to_dense()?;
    let hermitian = m.is_hermitian(1e-12);
    let kappa_at: Box<dyn Fn(f64) -> (f64, f64)> = if hermitian {
        let (vals, _) = m.hermitian_eigen();
        Box::new(move |eta| {
            let abs: Vec<f64> = vals.iter().map(|v| (v + eta).abs()).collect();
            let hi = abs.iter().cloned().fold(0.0, f64::max);
            let lo = abs.iter().cloned().fold(f64::INFINITY, f64::min);
            (if lo > 0.0 { hi / lo } else { f64::INFINITY }, hi)
        })
    } else {
        let m = m.clone();
        Box::new(move |eta| {
            let shifted = m.add(&ComplexMatrix::identity(m.dim()).scale(real(eta)));
            let sv = shifted.singular_values();
            let (hi, lo) = (sv[0], *sv.last().unwrap());
            (if lo > 0.0 { hi / lo } else { f64::INFINITY }, hi)
        })
    };

    let (vals, _) = m.hermitian_eigen();
    let span = m.spectral_norm().max(1e-12);
    let mut lo = if hermitian { -vals[0] } else { -span };
    let mut hi = lo + span;
    let mut guard = 0;
    while kappa_at(hi).0 > target {
        hi = lo + 2.0 * (hi - lo);
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracket(format!("κ = {target} not reached by any shift")));
        }
    }
    if kappa_at(lo).0 < target {
        return Err(Error::Bracket(format!(
            "κ at the lower end of the bracket is already below {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kappa_at(mid).0 > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let eta = 0.5 * (lo + hi);
    let (kappa, zeta) = kappa_at(eta);
    if (kappa / target - 1.0).abs() > 1e-6 {
        return Err(Error::Bracket(format!("bisection stalled at κ = {kappa}")));
    }
    Ok((eta, zeta))
}

/// σ_max / σ_min.
pub fn condition_number(m: &ComplexMatrix) -> Result<f64> {
    let k = m.condition_number();
    if k.is_finite() {
        Ok(k)
    } else {
        Err(Error::Singular("infinite condition number".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// Entries at `|i − j| ∈ {1, side}` across the whole band, including the
    /// links between the end of one grid row and the start of the next.
    Banded,
    /// Five-point Dirichlet Laplacian on a `side × side` grid.
    Grid,
}

impl std::str::FromStr for Stencil {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "banded" => Ok(Stencil::Banded),
            "grid" => Ok(Stencil::Grid),
            other => Err(invalid(format!("unknown stencil {other:?}"))),
        }
    }
}

/// Integer stencil matrix: 4 on the diagonal, −1 on the neighbours.
pub fn stencil_matrix(side: usize, stencil: Stencil) -> ComplexMatrix {
    let dim = side * side;
    ComplexMatrix::from_real_fn(dim, |i, j| {
        let d = i.abs_diff(j);
        let neighbour = match stencil {
            Stencil::Banded => d == 1 || d == side,
            Stencil::Grid => d == side || (d == 1 && i / side == j / side),
        };
        if i == j {
            4.0
        } else if neighbour {
            -1.0
        } else {
            0.0
        }
    })
}

/// Scale `1/‖L‖_F` of the Dirichlet grid stencil. It reproduces the printed
/// normalizations of both the 4×4 (0.22941573) and 16×16 (0.0562544) grids.
pub fn grid_scale(side: usize) -> f64 {
    1.0 / stencil_matrix(side, Stencil::Grid).frobenius_norm()
}

/// Right-hand side `(1, …, 1, 0, …)` on the first `ones` entries,
/// normalized, with `U = I^⊗(n−h) ⊗ H^⊗h`.
fn top_boundary_u(n: usize, ones: usize) -> Result<PauliSum> {
    if !ones.is_power_of_two() || ones > 1 << n {
        return Err(invalid(format!("{ones} boundary entries cannot be prepared by Hadamards")));
    }
    let h = ones.trailing_zeros() as usize;
    hadamard_layer(n, &(n - h..n).collect::<Vec<_>>())
}

fn from_dense(label: &str, m: &ComplexMatrix, u: PauliSum) -> Result<LinearProblem> {
    let a = decompose_dense(m)?;
    LinearProblem::new(label, a, u)
}

/// The 16×16 potential grid with its printed entries.
pub fn potential_grid_4x4() -> Result<LinearProblem> {
    let m = ComplexMatrix::from_real_fn(16, |i, j| {
        let d = i.abs_diff(j);
        if d == 0 {
            PGLS_DIAG
        } else if d == 1 || d == 4 {
            PGLS_OFF
        } else {
            0.0
        }
    });
    let mut p = from_dense("pgls", &m, top_boundary_u(4, 4)?)?;
    p.meta.b_scale = Some(1.0);
    p.meta.stencil = Some(Stencil::Banded);
    Ok(p)
}

/// Scaled Laplace system on a `side × side` grid (`side` of 4 or 16) with a
/// constant potential `V₀ = ‖A‖₂ / 4` on the first `side` entries. `A` is
/// Pauli-decomposed through the four-unitary split.
pub fn laplace_grid(side: usize, stencil: Stencil) -> Result<LinearProblem> {
    if side != 4 && side != 16 {
        return Err(invalid(format!("grid side {side} not supported (use 4 or 16)")));
    }
    let n = (side * side).trailing_zeros() as usize;
    let scale = grid_scale(side);
    let m = stencil_matrix(side, stencil).scale(real(scale));
    let a = decompose_via_split(&m)?;
    let direct = decompose_dense(&m)?;
    let diff = a.add(&direct.scale(real(-1.0)))?.simplify(1e-10);
    if !diff.is_empty() {
        return Err(invalid("split and direct Pauli decompositions disagree"));
    }
    let mut p = LinearProblem::new(&format!("laplace{side}"), a, top_boundary_u(n, side)?)?;
    let v0 = 0.25 * p.meta.norm;
    p.meta.matrix_scale = Some(scale);
    p.meta.b_scale = Some(v0 * (side as f64).sqrt());
    p.meta.stencil = Some(stencil);
    Ok(p)
}

/// The identity system `A = U = I`, solved by `|0…0⟩`.
pub fn identity_problem(n: usize) -> Result<LinearProblem> {
    LinearProblem::new(
        "identity",
        PauliSum::identity(n, real(1.0)),
        PauliSum::identity(n, real(1.0)),
    )
}

/// Builds a benchmark by name. `seed` only affects `random`.
pub fn by_name(name: &str, stencil: Stencil, seed: u64) -> Result<LinearProblem> {
    match name {
        "iqlsp" => ising_problem(),
        "rqlsp1" => rqlsp1(),
        "rqlsp2" => rqlsp2(),
        "pgls" => potential_grid_4x4(),
        "laplace4" => laplace_grid(4, stencil),
        "laplace16" => laplace_grid(16, stencil),
        "identity" => identity_problem(4),
        "ising" => ising_tuned(4, 0.1, 60.0),
        "random" => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut p = random_problem(4, 4, 2, 10.0, &mut rng)?;
            p.meta.seed = Some(seed);
            Ok(p)
        }
        other => Err(invalid(format!(
            "unknown problem {other:?}; expected one of {}",
            PROBLEM_NAMES.join(", ")
        ))),
    }
}

pub fn problem_names() -> &'static [&'static str] {
    PROBLEM_NAMES
}

/// `m = ½U_B + ½V_B + (i/2)U_C + (i/2)V_C` with unitary factors.
#[derive(Clone, Debug)]
pub struct UnitarySplit {
    pub u_b: ComplexMatrix,
    pub v_b: ComplexMatrix,
    pub u_c: ComplexMatrix,
    pub v_c: ComplexMatrix,
}

impl UnitarySplit {
    pub const WEIGHTS: [Complex64; 4] = [
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, 0.5),
        Complex64::new(0.0, 0.5),
    ];

    pub fn factors(&self) -> [&ComplexMatrix; 4] {
        [&self.u_b, &self.v_b, &self.u_c, &self.v_c]
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.u_b.dim();
        self.factors()
            .iter()
            .zip(Self::WEIGHTS)
            .fold(ComplexMatrix::zeros(d), |acc, (f, w)| acc.add(&f.scale(w)))
    }
}

/// Splits a matrix with `‖m‖₂ ≤ 1` into four unitaries. With
/// `B = (m + m†)/2` and `C = (m − m†)/(2i)`, `U_B = B + i√(I − B²)` and
/// `V_B = B − i√(I − B²) = U_B†`, likewise for `C`.
pub fn unitary_split(m: &ComplexMatrix) -> Result<UnitarySplit> {
    let norm = m.spectral_norm();
    if norm > 1.0 + INVARIANT_TOL {
        return Err(Error::Norm(norm));
    }
    let d = m.dim();
    let adj = m.adjoint();
    let b = m.add(&adj).scale(real(0.5));
    let c = m.sub(&adj).scale(Complex64::new(0.0, -0.5));
    let pair = |h: &ComplexMatrix| {
        let rest = ComplexMatrix::identity(d).sub(&h.matmul(h));
        // ‖h‖₂ ≤ 1 holds only to rounding; clamp the spectrum at zero
        let root = rest.hermitian_map(|v| real(v.max(0.0).sqrt()));
        let i_root = root.scale(Complex64::new(0.0, 1.0));
        (h.add(&i_root), h.sub(&i_root))
    };
    let (u_b, v_b) = pair(&b);
    let (u_c, v_c) = pair(&c);
    Ok(UnitarySplit { u_b, v_b, u_c, v_c })
}

/// Pauli form of `m` assembled from the Pauli forms of its four unitary factors.
pub fn decompose_via_split(m: &ComplexMatrix) -> Result<PauliSum> {
    let split = unitary_split(m)?;
    let n = m
        .num_qubits()
        .ok_or_else(|| invalid(format!("dimension {} is not a power of two", m.dim())))?;
    let mut acc = PauliSum::new(n);
    for (f, w) in split.factors().iter().zip(UnitarySplit::WEIGHTS) {
        acc = acc.add(&decompose_dense(f)?.scale(w))?;
    }
    Ok(acc.simplify(DEFAULT_DROP_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_text_round_trips_exactly() {
        for text in [IQLSP_TEXT, RQLSP1_TEXT, RQLSP2_TEXT] {
            assert_eq!(PauliSum::parse_text(text).unwrap().to_text(), text);
        }
    }

    #[test]
    fn iqlsp_b_is_uniform() {
        let p = ising_problem().unwrap();
        for a in p.b.amplitudes() {
            assert!((a - real(0.25)).norm() < 1e-12);
        }
        assert!(p.a.terms().iter().all(|(c, _)| c.im == 0.0));
        assert!(p.a_dense().is_hermitian(1e-15));
    }

    #[test]
    fn split_of_z_and_zero() {
        let z = ComplexMatrix::from_real_fn(2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
        let s = unitary_split(&z).unwrap();
        assert!(s.u_b.max_abs_diff(&z) < 1e-15);
        assert!(s.v_b.max_abs_diff(&z) < 1e-15);
        assert!(s.reconstruct().max_abs_diff(&z) < 1e-15);

        let s = unitary_split(&ComplexMatrix::zeros(2)).unwrap();
        let i2 = ComplexMatrix::identity(2);
        assert!(s.u_b.max_abs_diff(&i2.scale(Complex64::new(0.0, 1.0))) < 1e-15);
        assert!(s.v_b.max_abs_diff(&i2.scale(Complex64::new(0.0, -1.0))) < 1e-15);
    }

    #[test]
    fn split_rejects_large_norm() {
        let m = ComplexMatrix::identity(2).scale(real(1.5));
        assert!(matches!(unitary_split(&m), Err(Error::Norm(_))));
    }

    #[test]
    fn tune_kappa_rejects_unit_target() {
        let base = PauliSum::parse_text("1.0 0.0 ZI\n").unwrap();
        assert!(matches!(tune_kappa(&base, 1.0), Err(Error::Bracket(_))));
    }

    #[test]
    fn ising_family_zero_coupling_norm() {
        let p = ising_family(3, 0.0, 0.0, 3.0).unwrap();
        assert!(p.meta.norm <= 1.0 + 1e-12);
    }

    #[test]
    fn grid_scales_match_printed_normalizations() {
        assert!((4.0 * grid_scale(4) - PGLS_DIAG).abs() < 5e-9);
        assert!((grid_scale(4) + PGLS_OFF).abs() < 5e-9);
        assert!((4.0 * grid_scale(16) - 0.0562544).abs() < 5e-8);
        assert!((grid_scale(16) - 0.0140636).abs() < 5e-8);
    }

    #[test]
    fn pgls_ratio_and_b() {
        assert!((PGLS_DIAG / PGLS_OFF + 4.0).abs() < 1e-6);
        let p = potential_grid_4x4().unwrap();
        assert!(p.meta.norm <= 1.0);
        for (i, a) in p.b.amplitudes().iter().enumerate() {
            let want = if i < 4 { 0.5 } else { 0.0 };
            assert!((a - real(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn problem_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = rqlsp1().unwrap();
        p.write_dir(dir.path()).unwrap();
        let q = LinearProblem::read_dir(dir.path()).unwrap();
        assert_eq!(q.a, p.a);
        assert_eq!(q.meta, p.meta);
    }

    #[test]
    fn unknown_problem_name() {
        assert!(by_name("nope", Stencil::Banded, 0).is_err());
    }
}
