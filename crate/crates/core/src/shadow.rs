//! Random-Pauli classical shadows.
//!
//! Two routes produce estimates with the same distribution:
//!
//! * [`ClassicalShadow`] keeps every snapshot explicitly.
//! * [`BinnedShadow`] draws the per-batch histogram of (basis, outcome) cells
//!   directly from its multinomial law and folds each histogram into the
//!   summed snapshot estimates of all `4^n` strings with a per-qubit
//!   transform. This is what makes budgets of millions of snapshots per cost
//!   evaluation affordable.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::matrix::ComplexMatrix;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::state::{Gate, StateVector};

/// Largest register for density reconstruction.
pub const MAX_RECONSTRUCT_QUBITS: usize = 6;

/// Largest register the binned route handles (`6^n` histogram cells).
pub const MAX_BINNED_QUBITS: usize = 9;

/// `ceil(constant · log2(m) · 3^k / eps²)`, at least 1.
pub fn shadow_size(m: usize, k: usize, eps: f64, constant: f64) -> Result<u64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("shadow precision must be positive, got {eps}")));
    }
    if m == 0 {
        return Err(invalid("observable count must be at least 1"));
    }
    if !(constant > 0.0) {
        return Err(invalid(format!("shadow constant must be positive, got {constant}")));
    }
    let raw = constant * (m as f64).log2() * 3f64.powi(k as i32) / (eps * eps);
    Ok((raw.ceil() as u64).max(1))
}

/// `max(1, floor(2·log2(2m)))`.
pub fn default_batches(m: usize) -> usize {
    let m = m.max(1) as f64;
    ((2.0 * (2.0 * m).log2()).floor() as usize).max(1)
}

/// Splits `total` into `batches` sizes differing by at most one, larger first.
pub fn batch_sizes(total: u64, batches: usize) -> Vec<u64> {
    let k = batches as u64;
    (0..k).map(|b| total / k + u64::from(b < total % k)).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Anything that can return `⟨P⟩` for the current state.
pub trait PauliEstimator {
    fn num_qubits(&self) -> usize;
    fn estimate(&self, p: &PauliString) -> Result<f64>;
}

/// Exact expectations, for the oracle cost path.
pub struct ExactEstimator<'a>(pub &'a StateVector);

impl PauliEstimator for ExactEstimator<'_> {
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    fn estimate(&self, p: &PauliString) -> Result<f64> {
        self.0.expectation(p)
    }
}

/// One measured basis and outcome per qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Snapshot {
    n: u8,
    bx: u16,
    bz: u16,
    outcome: u16,
}

impl Snapshot {
    /// `outcomes[q]` is `true` for the −1 eigenvalue of basis `bases[q]`.
    pub fn new(bases: &[Pauli], outcomes: &[bool]) -> Result<Self> {
        let n = bases.len();
        if outcomes.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: outcomes.len(),
            });
        }
        if n == 0 || n > 16 {
            return Err(invalid(format!("snapshot width {n} outside 1..=16")));
        }
        let mut s = Snapshot {
            n: n as u8,
            bx: 0,
            bz: 0,
            outcome: 0,
        };
        for q in 0..n {
            let bit = 1u16 << (n - 1 - q);
            let (x, z) = bases[q].bits();
            if !x && !z {
                return Err(invalid("snapshot basis must be X, Y or Z"));
            }
            if x {
                s.bx |= bit;
            }
            if z {
                s.bz |= bit;
            }
            if outcomes[q] {
                s.outcome |= bit;
            }
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn bases(&self) -> Vec<Pauli> {
        let n = self.num_qubits();
        (0..n)
            .map(|q| {
                let bit = 1u16 << (n - 1 - q);
                Pauli::from_bits(self.bx & bit != 0, self.bz & bit != 0)
            })
            .collect()
    }

    pub fn outcomes(&self) -> Vec<bool> {
        let n = self.num_qubits();
        (0..n).map(|q| self.outcome & (1 << (n - 1 - q)) != 0).collect()
    }

    /// `Tr(P · ρ̂)` for this snapshot's inverse-channel estimate `ρ̂`.
    pub fn estimate(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.num_qubits() {
            return Err(Error::Dimension {
                expected: self.num_qubits(),
                found: p.num_qubits(),
            });
        }
        Ok(self.estimate_unchecked(p))
    }

    #[inline]
    fn estimate_unchecked(&self, p: &PauliString) -> f64 {
        let supp = p.support() as u16;
        let (px, pz) = (p.x_mask() as u16, p.z_mask() as u16);
        if ((px ^ self.bx) | (pz ^ self.bz)) & supp != 0 {
            return 0.0;
        }
        let mag = 3f64.powi(supp.count_ones() as i32);
        if (self.outcome & supp).count_ones() % 2 == 0 {
            mag
        } else {
            -mag
        }
    }

    /// Per-qubit digit `2·basis + outcome` with bases ordered X, Y, Z.
    fn cell_index(&self) -> usize {
        let n = self.num_qubits();
        let mut idx = 0;
        for q in 0..n {
            let bit = 1u16 << (n - 1 - q);
            let d = match (self.bx & bit != 0, self.bz & bit != 0) {
                (true, false) => 0,
                (true, true) => 1,
                _ => 2,
            };
            idx = idx * 6 + 2 * d + usize::from(self.outcome & bit != 0);
        }
        idx
    }
}

/// Rotation taking basis letter `d` (0 = X, 1 = Y, 2 = Z) to the Z basis.
fn basis_rotation(d: usize, q: usize) -> Vec<Gate> {
    match d {
        0 => vec![Gate::H(q)],
        1 => vec![Gate::Sdg(q), Gate::H(q)],
        _ => Vec::new(),
    }
}

fn rotated_probabilities(state: &StateVector, digits: &[usize]) -> Vec<f64> {
    let mut s = state.clone();
    for (q, &d) in digits.iter().enumerate() {
        for g in basis_rotation(d, q) {
            s.apply(&g).expect("qubit within register");
        }
    }
    s.probabilities()
}

/// Probability of each (basis, outcome) cell under a uniformly random basis,
/// in the base-6 layout of [`Snapshot::cell_index`].
fn cell_probabilities(state: &StateVector) -> Vec<f64> {
    let n = state.num_qubits();
    let weight = 3f64.powi(n as i32).recip();
    let mut out = vec![0.0; 6usize.pow(n as u32)];
    let mut digits = vec![0usize; n];
    fn walk(
        s: &StateVector,
        q: usize,
        digits: &mut Vec<usize>,
        out: &mut [f64],
        weight: f64,
    ) {
        let n = s.num_qubits();
        if q == n {
            for (o, p) in s.probabilities().into_iter().enumerate() {
                let mut idx = 0;
                for (k, &d) in digits.iter().enumerate() {
                    let bit = (o >> (n - 1 - k)) & 1;
                    idx = idx * 6 + 2 * d + bit;
                }
                out[idx] = p * weight;
            }
            return;
        }
        for d in 0..3 {
            let mut t = s.clone();
            for g in basis_rotation(d, q) {
                t.apply(&g).expect("qubit within register");
            }
            digits[q] = d;
            walk(&t, q + 1, digits, out, weight);
        }
    }
    walk(state, 0, &mut digits, &mut out, weight);
    out
}

/// Folds a base-6 cell histogram into summed snapshot estimates for every
/// Pauli string, indexed by `(x << n) | z`.
fn fold_histogram(n: usize, counts: &[f64]) -> Vec<f64> {
    let mut cur = counts.to_vec();
    for q in 0..n {
        let prefix = 4usize.pow(q as u32);
        let suffix = 6usize.pow((n - 1 - q) as u32);
        let mut next = vec![0.0; prefix * 4 * suffix];
        for p in 0..prefix {
            for s in 0..suffix {
                let v = |j: usize| cur[(p * 6 + j) * suffix + s];
                let out = |l: usize| (p * 4 + l) * suffix + s;
                next[out(0)] = v(0) + v(1) + v(2) + v(3) + v(4) + v(5);
                next[out(1)] = 3.0 * (v(0) - v(1));
                next[out(2)] = 3.0 * (v(2) - v(3));
                next[out(3)] = 3.0 * (v(4) - v(5));
            }
        }
        cur = next;
    }
    // letter codes I, X, Y, Z -> (x, z) masks
    let mut table = vec![0.0; 1 << (2 * n)];
    for (code_idx, v) in cur.into_iter().enumerate() {
        let (mut x, mut z) = (0usize, 0usize);
        for q in 0..n {
            let l = (code_idx / 4usize.pow((n - 1 - q) as u32)) % 4;
            x = (x << 1) | usize::from(l == 1 || l == 2);
            z = (z << 1) | usize::from(l == 2 || l == 3);
        }
        table[(x << n) | z] = v;
    }
    table
}

/// Explicitly stored snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalShadow {
    n: usize,
    snapshots: Vec<Snapshot>,
}

impl ClassicalShadow {
    pub fn from_snapshots(n: usize, snapshots: Vec<Snapshot>) -> Result<Self> {
        if let Some(s) = snapshots.iter().find(|s| s.num_qubits() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: s.num_qubits(),
            });
        }
        Ok(ClassicalShadow { n, snapshots })
    }

    /// Measures `count` copies of `state`, each in an independent uniformly
    /// random Pauli basis.
    pub fn collect<R: Rng + ?Sized>(state: &StateVector, count: usize, rng: &mut R) -> Result<Self> {
        if count == 0 {
            return Err(invalid("snapshot count must be at least 1"));
        }
        let n = state.num_qubits();
        let mut cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        let mut snapshots = Vec::with_capacity(count);
        for _ in 0..count {
            let digits: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let probs = cache
                .entry(digits.clone())
                .or_insert_with(|| rotated_probabilities(state, &digits));
            let mut u = rng.random::<f64>();
            let mut o = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                u -= p;
                if u < 0.0 {
                    o = i;
                    break;
                }
            }
            let bases: Vec<Pauli> = digits.iter().map(|&d| [Pauli::X, Pauli::Y, Pauli::Z][d]).collect();
            let outcomes: Vec<bool> = (0..n).map(|q| (o >> (n - 1 - q)) & 1 == 1).collect();
            snapshots.push(Snapshot::new(&bases, &outcomes)?);
        }
        Ok(ClassicalShadow { n, snapshots })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Median of the batch means of single-snapshot estimates, clamped to
    /// `[-1, 1]`. Batches are contiguous and as equal as possible.
    pub fn estimate_pauli(&self, p: &PauliString, batches: usize) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        if self.snapshots.is_empty() {
            return Err(invalid("empty shadow"));
        }
        if batches == 0 || batches > self.snapshots.len() {
            return Err(invalid(format!(
                "{batches} batches for {} snapshots",
                self.snapshots.len()
            )));
        }
        if p.is_identity() {
            return Ok(1.0);
        }
        let mut means = Vec::with_capacity(batches);
        let mut start = 0usize;
        for size in batch_sizes(self.snapshots.len() as u64, batches) {
            let end = start + size as usize;
            let sum: f64 = self.snapshots[start..end]
                .iter()
                .map(|s| s.estimate_unchecked(p))
                .sum();
            means.push(sum / size as f64);
            start = end;
        }
        Ok(median(&mut means).clamp(-1.0, 1.0))
    }

    /// Average of the per-snapshot inverse-channel matrices.
    pub fn reconstruct_density(&self) -> Result<ComplexMatrix> {
        if self.n > MAX_RECONSTRUCT_QUBITS {
            return Err(Error::Scale {
                what: "density reconstruction",
                n: self.n,
                limit: MAX_RECONSTRUCT_QUBITS,
            });
        }
        if self.snapshots.is_empty() {
            return Err(invalid("empty shadow"));
        }
        let n = self.n;
        let mut counts = vec![0.0; 6usize.pow(n as u32)];
        for s in &self.snapshots {
            counts[s.cell_index()] += 1.0;
        }
        let table = fold_histogram(n, &counts);
        let scale = 1.0 / (self.snapshots.len() as f64 * (1u64 << n) as f64);
        let mut sum = PauliSum::new(n);
        for (idx, &v) in table.iter().enumerate() {
            if v != 0.0 {
                let p = PauliString::from_masks(n, (idx >> n) as u64, (idx & ((1 << n) - 1)) as u64)?;
                sum.push(Complex64::new(v * scale, 0.0), p)?;
            }
        }
        sum.to_dense()
    }

    /// View with a fixed batch count, usable as a [`PauliEstimator`].
    pub fn with_batches(&self, batches: usize) -> ShadowEstimator<'_> {
        ShadowEstimator {
            shadow: self,
            batches,
        }
    }
}

pub struct ShadowEstimator<'a> {
    shadow: &'a ClassicalShadow,
    batches: usize,
}

impl PauliEstimator for ShadowEstimator<'_> {
    fn num_qubits(&self) -> usize {
        self.shadow.n
    }

    fn estimate(&self, p: &PauliString) -> Result<f64> {
        self.shadow.estimate_pauli(p, self.batches)
    }
}

/// Per-batch summed snapshot estimates for every Pauli string.
#[derive(Clone, Debug)]
pub struct BinnedShadow {
    n: usize,
    sizes: Vec<u64>,
    sums: Vec<Vec<f64>>,
}

impl BinnedShadow {
    /// Draws a shadow of `count` snapshots of `state` split into `batches`.
    pub fn sample<R: Rng + ?Sized>(
        state: &StateVector,
        count: u64,
        batches: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = state.num_qubits();
        if n > MAX_BINNED_QUBITS {
            return Err(Error::Scale {
                what: "binned shadow",
                n,
                limit: MAX_BINNED_QUBITS,
            });
        }
        if batches == 0 || count < batches as u64 {
            return Err(invalid(format!("{batches} batches for {count} snapshots")));
        }
        let probs = cell_probabilities(state);
        let sampler = CellSampler::new(&probs);
        let sizes = batch_sizes(count, batches);
        let mut counts = vec![0.0; probs.len()];
        let sums = sizes
            .iter()
            .map(|&size| {
                sampler.draw(size, rng, &mut counts);
                fold_histogram(n, &counts)
            })
            .collect();
        Ok(BinnedShadow { n, sizes, sums })
    }

    /// Bins explicit snapshots with the same contiguous batching as
    /// [`ClassicalShadow::estimate_pauli`].
    pub fn from_shadow(shadow: &ClassicalShadow, batches: usize) -> Result<Self> {
        let n = shadow.n;
        if n > MAX_BINNED_QUBITS {
            return Err(Error::Scale {
                what: "binned shadow",
                n,
                limit: MAX_BINNED_QUBITS,
            });
        }
        if batches == 0 || shadow.len() < batches {
            return Err(invalid(format!("{batches} batches for {} snapshots", shadow.len())));
        }
        let sizes = batch_sizes(shadow.len() as u64, batches);
        let mut start = 0usize;
        let mut sums = Vec::with_capacity(batches);
        for &size in &sizes {
            let mut counts = vec![0.0; 6usize.pow(n as u32)];
            for s in &shadow.snapshots[start..start + size as usize] {
                counts[s.cell_index()] += 1.0;
            }
            sums.push(fold_histogram(n, &counts));
            start += size as usize;
        }
        Ok(BinnedShadow { n, sizes, sums })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn total_snapshots(&self) -> u64 {
        self.sizes.iter().sum()
    }

    pub fn batches(&self) -> usize {
        self.sizes.len()
    }
}

impl PauliEstimator for BinnedShadow {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn estimate(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        if p.is_identity() {
            return Ok(1.0);
        }
        let idx = ((p.x_mask() << self.n) | p.z_mask()) as usize;
        let mut means: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.sizes)
            .map(|(t, &size)| t[idx] / size as f64)
            .collect();
        Ok(median(&mut means).clamp(-1.0, 1.0))
    }
}

/// Exact multinomial sampling of cell histograms.
struct CellSampler<'a> {
    probs: &'a [f64],
    cdf: Vec<f64>,
    last_positive: usize,
}

impl<'a> CellSampler<'a> {
    fn new(probs: &'a [f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        CellSampler {
            probs,
            cdf,
            last_positive,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, count: u64, rng: &mut R, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if count.saturating_mul(8) < self.probs.len() as u64 {
            // few draws: inverse-CDF per snapshot
            let total = *self.cdf.last().unwrap_or(&1.0);
            for _ in 0..count {
                let u = rng.random::<f64>() * total;
                let i = self.cdf.partition_point(|&c| c <= u).min(self.last_positive);
                out[i] += 1.0;
            }
            return;
        }
        // many draws: conditional binomials cell by cell
        let mut remaining = count;
        let mut mass: f64 = self.probs.iter().sum();
        for (i, &p) in self.probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let k = if i == self.last_positive || mass <= p {
                remaining
            } else {
                let q = (p / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, q).expect("valid binomial").sample(rng)
            };
            out[i] = k as f64;
            remaining -= k;
            mass -= p;
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
    fn shadow_size_examples() {
        assert_eq!(shadow_size(2, 1, 1.0, 1.0).unwrap(), 3);
        assert_eq!(shadow_size(1, 3, 0.1, 1.0).unwrap(), 1);
        assert!(shadow_size(2, 1, 0.0, 1.0).is_err());
        assert!(shadow_size(2, 1, -0.1, 1.0).is_err());
    }

    #[test]
    fn default_batch_rule() {
        assert_eq!(default_batches(1), 2);
        assert_eq!(default_batches(76), 14);
    }

    #[test]
    fn batch_sizes_are_balanced() {
        assert_eq!(batch_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(batch_sizes(9, 3), vec![3, 3, 3]);
    }

    #[test]
    fn snapshot_estimate_examples() {
        let z0 = Snapshot::new(&[Pauli::Z], &[false]).unwrap();
        assert_eq!(z0.estimate(&ps("Z")).unwrap(), 3.0);
        let x0 = Snapshot::new(&[Pauli::X], &[false]).unwrap();
        assert_eq!(x0.estimate(&ps("Z")).unwrap(), 0.0);
        assert_eq!(x0.estimate(&ps("I")).unwrap(), 1.0);
        let s = Snapshot::new(&[Pauli::X, Pauli::Y, Pauli::Z], &[true, false, true]).unwrap();
        assert_eq!(s.estimate(&ps("XIZ")).unwrap(), 9.0);
        assert_eq!(s.estimate(&ps("XYI")).unwrap(), -9.0);
        assert!(s.estimate(&ps("XX")).is_err());
    }

    #[test]
    fn snapshot_round_trips_fields() {
        let s = Snapshot::new(&[Pauli::Y, Pauli::X], &[true, false]).unwrap();
        assert_eq!(s.bases(), vec![Pauli::Y, Pauli::X]);
        assert_eq!(s.outcomes(), vec![true, false]);
        assert!(Snapshot::new(&[Pauli::I], &[false]).is_err());
    }

    #[test]
    fn eigenstates_give_fixed_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero = StateVector::zero_state(1).unwrap();
        let plus = zero.apply_gate(&Gate::H(0)).unwrap();
        let sz = ClassicalShadow::collect(&zero, 500, &mut rng).unwrap();
        let sp = ClassicalShadow::collect(&plus, 500, &mut rng).unwrap();
        for s in sz.snapshots() {
            if s.bases()[0] == Pauli::Z {
                assert!(!s.outcomes()[0]);
            }
        }
        for s in sp.snapshots() {
            if s.bases()[0] == Pauli::X {
                assert!(!s.outcomes()[0]);
            }
        }
    }

    #[test]
    fn identity_estimate_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = StateVector::zero_state(2).unwrap();
        let sh = ClassicalShadow::collect(&s, 10, &mut rng).unwrap();
        assert_eq!(sh.estimate_pauli(&ps("II"), 3).unwrap(), 1.0);
        assert!(sh.estimate_pauli(&ps("II"), 11).is_err());
        let b = BinnedShadow::sample(&s, 10, 3, &mut rng).unwrap();
        assert_eq!(b.estimate(&ps("II")).unwrap(), 1.0);
    }

    #[test]
    fn single_snapshot_reconstruction_has_unit_trace() {
        let s = Snapshot::new(&[Pauli::Y, Pauli::X], &[true, false]).unwrap();
        let sh = ClassicalShadow::from_snapshots(2, vec![s]).unwrap();
        let rho = sh.reconstruct_density().unwrap();
        let tr: Complex64 = (0..4).map(|i| rho.get(i, i)).sum();
        assert!((tr - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(rho.is_hermitian(1e-15));
    }

    #[test]
    fn cell_probabilities_sum_to_one() {
        let s = StateVector::zero_state(3).unwrap().apply_gate(&Gate::RX(1, 0.3)).unwrap();
        let p = cell_probabilities(&s);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_conserves_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let probs = [0.1, 0.0, 0.5, 0.4, 0.0];
        let s = CellSampler::new(&probs);
        let mut out = [0.0; 5];
        for count in [1u64, 3, 1000, 123_456] {
            s.draw(count, &mut rng, &mut out);
            assert_eq!(out.iter().sum::<f64>(), count as f64);
            assert_eq!(out[1], 0.0);
            assert_eq!(out[4], 0.0);
        }
    }
}
