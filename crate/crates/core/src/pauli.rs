//! Pauli strings and weighted Pauli sums.
//!
//! A [`PauliString`] stores one X-bit and one Z-bit per qubit. Qubit 0 is the
//! leftmost letter of the written string (`"ZZII"` has Z on qubits 0 and 1) and
//! maps to the most significant bit of a computational-basis index, so the masks
//! line up directly with state-vector indices.
//!
//! The letter with bits `(x, z)` is `i^(x·z) X^x Z^z`, which gives `Y = iXZ`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Widest string the bit encoding can hold.
pub const MAX_STRING_QUBITS: usize = 64;

/// Widest register for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Default magnitude below which [`PauliSum::simplify`] drops a term.
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A power of `i`: one of `1, i, -1, -i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(e: u32) -> Self {
        Phase((e % 4) as u8)
    }

    pub fn exponent(self) -> u32 {
        self.0 as u32
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) % 4)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// An n-qubit tensor product of single-qubit Paulis, without a phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    /// The all-identity string. Panics unless `1 <= n <= 64`.
    pub fn identity(n: usize) -> Self {
        assert!(
            (1..=MAX_STRING_QUBITS).contains(&n),
            "qubit count {n} outside 1..=64"
        );
        PauliString { n: n as u8, x: 0, z: 0 }
    }

    /// Builds a string from raw masks; bit `n-1-q` holds qubit `q`.
    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n == 0 || n > MAX_STRING_QUBITS {
            return Err(Error::Scale {
                what: "Pauli string",
                n,
                limit: MAX_STRING_QUBITS,
            });
        }
        let m = full_mask(n);
        if (x | z) & !m != 0 {
            return Err(Error::InvalidArgument(format!(
                "masks {x:#x}/{z:#x} have bits beyond {n} qubits"
            )));
        }
        Ok(PauliString { n: n as u8, x, z })
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let n = letters.len();
        let mut s = PauliString::from_masks(n, 0, 0)?;
        for (q, &p) in letters.iter().enumerate() {
            s.set_letter(q, p);
        }
        Ok(s)
    }

    /// A single letter on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self> {
        if q >= n {
            return Err(Error::QubitIndex { index: q, n });
        }
        let mut s = PauliString::from_masks(n, 0, 0)?;
        s.set_letter(q, p);
        Ok(s)
    }

    #[inline]
    fn bit(&self, q: usize) -> u64 {
        1u64 << (self.n as usize - 1 - q)
    }

    fn set_letter(&mut self, q: usize, p: Pauli) {
        let b = self.bit(q);
        let (x, z) = p.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Mask of qubits carrying a non-identity letter.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let b = self.bit(q);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.num_qubits()).map(move |q| self.letter(q))
    }

    /// Number of non-identity letters.
    pub fn locality(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    /// Number of Y letters; the string equals `i^y X^x Z^z`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `self · other = phase · result`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.num_qubits(),
                found: other.num_qubits(),
            });
        }
        Ok(self.compose(other))
    }

    /// Product without the size check; both strings must share `n`.
    #[inline]
    pub(crate) fn compose(&self, other: &PauliString) -> (Phase, PauliString) {
        debug_assert_eq!(self.n, other.n);
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let result = PauliString { n: self.n, x, z };
        // Z^z1 X^x2 = (-1)^{|z1 & x2|} X^x2 Z^z1
        let e = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - result.y_count();
        (Phase::from_exponent(e), result)
    }

    /// The same letters followed by `extra` identity qubits.
    pub fn padded(&self, extra: usize) -> Result<PauliString> {
        let n = self.num_qubits() + extra;
        if n > MAX_STRING_QUBITS {
            return Err(Error::Scale {
                what: "Pauli string",
                n,
                limit: MAX_STRING_QUBITS,
            });
        }
        PauliString::from_masks(n, self.x << extra, self.z << extra)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    fn letter_code(&self, q: usize) -> u8 {
        match self.letter(q) {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }
}

impl Ord for PauliString {
    /// Lexicographic by letters with `I < X < Y < Z`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            for q in 0..self.num_qubits() {
                match self.letter_code(q).cmp(&other.letter_code(q)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("invalid Pauli letter {c:?} in {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "empty Pauli string".into(),
            });
        }
        PauliString::from_letters(&letters)
    }
}

/// A complex-weighted list of Pauli strings on a common register.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        assert!((1..=MAX_STRING_QUBITS).contains(&n));
        PauliSum {
            n,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(
        n: usize,
        terms: impl IntoIterator<Item = (Complex64, PauliString)>,
    ) -> Result<Self> {
        let mut s = PauliSum::new(n);
        for (c, p) in terms {
            s.push(c, p)?;
        }
        Ok(s)
    }

    /// `c · I`.
    pub fn identity(n: usize, c: Complex64) -> Self {
        PauliSum {
            n,
            terms: vec![(c, PauliString::identity(n))],
        }
    }

    pub fn push(&mut self, c: Complex64, p: PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        self.terms.push((c, p));
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_locality(&self) -> usize {
        self.terms.iter().map(|(_, p)| p.locality()).max().unwrap_or(0)
    }

    /// Merges duplicate strings, drops terms with `|c| <= tol` and sorts
    /// the survivors lexicographically.
    pub fn simplify(&self, tol: f64) -> PauliSum {
        let mut index: HashMap<PauliString, usize> = HashMap::with_capacity(self.terms.len());
        let mut merged: Vec<(Complex64, PauliString)> = Vec::new();
        for &(c, p) in &self.terms {
            match index.get(&p) {
                Some(&k) => merged[k].0 += c,
                None => {
                    index.insert(p, merged.len());
                    merged.push((c, p));
                }
            }
        }
        merged.retain(|(c, _)| c.norm() > tol);
        merged.sort_by(|a, b| a.1.cmp(&b.1));
        PauliSum {
            n: self.n,
            terms: merged,
        }
    }

    pub fn scale(&self, k: Complex64) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self.terms.iter().map(|&(c, p)| (c * k, p)).collect(),
        }
    }

    /// Concatenation of the two term lists (not simplified).
    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(PauliSum { n: self.n, terms })
    }

    /// Operator product `self · other`, simplified with the default tolerance.
    pub fn compose(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        for &(c1, p1) in &self.terms {
            for &(c2, p2) in &other.terms {
                let (ph, p) = p1.compose(&p2);
                *acc.entry(p).or_default() += c1 * c2 * ph.to_complex();
            }
        }
        Ok(PauliSum {
            n: self.n,
            terms: acc.into_iter().map(|(p, c)| (c, p)).collect(),
        }
        .simplify(DEFAULT_DROP_TOL))
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self.terms.iter().map(|&(c, p)| (c.conj(), p)).collect(),
        }
    }

    /// `self ⊗ other`, with `self` on the leading (high-order) qubits.
    pub fn tensor(&self, other: &PauliSum) -> Result<PauliSum> {
        let n = self.n + other.n;
        if n > MAX_STRING_QUBITS {
            return Err(Error::Scale {
                what: "tensor product",
                n,
                limit: MAX_STRING_QUBITS,
            });
        }
        let mut out = PauliSum::new(n);
        for &(c1, p1) in &self.terms {
            for &(c2, p2) in &other.terms {
                let x = (p1.x << other.n) | p2.x;
                let z = (p1.z << other.n) | p2.z;
                out.terms.push((c1 * c2, PauliString::from_masks(n, x, z)?));
            }
        }
        Ok(out)
    }

    fn check_same(&self, other: &PauliSum) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// Dense `Σ c · P`.
    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::Scale {
                what: "dense rendering",
                n: self.n,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let mut m = ComplexMatrix::zeros(dim);
        for &(c, p) in &self.terms {
            let base = c * Phase::from_exponent(p.y_count()).to_complex();
            let (x, z) = (p.x as usize, p.z as usize);
            for col in 0..dim {
                let v = if (z & col).count_ones() % 2 == 0 {
                    base
                } else {
                    -base
                };
                m.add_at(col ^ x, col, v);
            }
        }
        Ok(m)
    }

    /// One term per line: `<re> <im> <LETTERS>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.terms {
            out.push_str(&format!("{:?} {:?} {}\n", c.re, c.im, p));
        }
        out
    }

    /// Parses the line format written by [`PauliSum::to_text`]. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse_text(text: &str) -> Result<PauliSum> {
        let mut n: Option<usize> = None;
        let mut terms = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `<re> <im> <LETTERS>`, got {line:?}"),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad number {s:?}: {e}"),
                })
            };
            let (re, im) = (num(fields[0])?, num(fields[1])?);
            let p: PauliString = fields[2].parse().map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: line_no, msg },
                other => other,
            })?;
            match n {
                None => n = Some(p.num_qubits()),
                Some(m) if m != p.num_qubits() => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("string {p} has {} qubits, expected {m}", p.num_qubits()),
                    })
                }
                _ => {}
            }
            terms.push((Complex64::new(re, im), p));
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "no terms found".into(),
        })?;
        Ok(PauliSum { n, terms })
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// In-place unnormalized Walsh–Hadamard transform: `out[s] = Σ_j (-1)^{|s&j|} in[j]`.
pub(crate) fn walsh_hadamard<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let len = v.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for j in block..block + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Hilbert–Schmidt projection `c_P = Tr(P·m) / 2^n` onto every Pauli string.
///
/// For each X-pattern the diagonal band `m[j, j^x]` is Walsh-transformed, which
/// yields every Z-pattern at once; all-zero bands are skipped, so sparse
/// matrices cost little more than their nonzero count.
pub fn decompose_dense(m: &ComplexMatrix) -> Result<PauliSum> {
    let dim = m.dim();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimension {dim} is not a power of two"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_DENSE_QUBITS {
        return Err(Error::Scale {
            what: "Pauli decomposition",
            n,
            limit: MAX_DENSE_QUBITS,
        });
    }
    let norm = 1.0 / dim as f64;
    let bands: Vec<Vec<(Complex64, PauliString)>> = (0..dim)
        .into_par_iter()
        .map(|x| {
            let mut g: Vec<Complex64> = (0..dim).map(|j| m.get(j, j ^ x)).collect();
            if g.iter().all(|v| v.norm() == 0.0) {
                return Vec::new();
            }
            walsh_hadamard(&mut g);
            g.into_iter()
                .enumerate()
                .filter(|(_, v)| v.norm() != 0.0)
                .map(|(z, v)| {
                    let p = PauliString::from_masks(n, x as u64, z as u64)
                        .expect("masks within register");
                    (v * Phase::from_exponent(p.y_count()).to_complex() * norm, p)
                })
                .collect()
        })
        .collect();
    let sum = PauliSum {
        n,
        terms: bands.into_iter().flatten().collect(),
    };
    Ok(sum.simplify(DEFAULT_DROP_TOL))
}
