//! Square complex matrices used as the dense oracle bridge.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_real_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_fn(dim, |r, c| Complex64::new(f(r, c), 0.0))
    }

    /// Builds a matrix from `dim*dim` entries in row-major order.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_nalgebra(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(ComplexMatrix(m))
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `log2(dim)` when the dimension is a power of two.
    pub fn num_qubits(&self) -> Option<usize> {
        let d = self.dim();
        (d.is_power_of_two() && d >= 2).then(|| d.trailing_zeros() as usize)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0[(r, c)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.0[(r, c)] = v;
    }

    #[inline]
    pub(crate) fn add_at(&mut self, r: usize, c: usize, v: Complex64) {
        self.0[(r, c)] += v;
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(&self.0 * &other.0)
    }

    pub fn add(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        ComplexMatrix(&self.0 * k)
    }

    /// Kronecker product with `self` as the leading factor.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(self.0.kronecker(&other.0))
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let d = self.dim();
        Ok((0..d)
            .map(|r| (0..d).map(|c| self.0[(r, c)] * v[c]).sum())
            .collect())
    }

    /// Solves `self · x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: b.len(),
            });
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let lu = self.0.clone().lu();
        lu.solve(&rhs)
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::Singular("LU factorization hit a zero pivot".into()))
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.0.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn spectral_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// `σ_max / σ_min`; infinite for a singular matrix.
    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Largest entry of `|U U† − I|`.
    pub fn unitarity_error(&self) -> f64 {
        self.matmul(&self.adjoint())
            .max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }

    /// Eigenvalues (ascending) and column eigenvectors of a Hermitian matrix.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let sym = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, ComplexMatrix(vectors))
    }

    /// Applies `f` to the eigenvalues of a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let (vals, vecs) = self.hermitian_eigen();
        let d = self.dim();
        let diag = DMatrix::from_fn(d, d, |r, c| if r == c { f(vals[r]) } else { Complex64::new(0.0, 0.0) });
        ComplexMatrix(&vecs.0 * diag * vecs.0.adjoint())
    }

    /// Dimension on the first line, then one `re im` pair per line in
    /// row-major order.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut out = format!("{d}\n");
        for r in 0..d {
            for c in 0..d {
                let v = self.0[(r, c)];
                let _ = writeln!(out, "{:?} {:?}", v.re, v.im);
            }
        }
        out
    }

    /// Parses [`ComplexMatrix::to_text`] output. Any whitespace layout is
    /// accepted after the dimension; `#` starts a comment line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'))
            .flat_map(|(k, l)| l.split_whitespace().map(move |t| (k + 1, t)));
        let (line, tok) = tokens.next().ok_or(Error::Parse {
            line: 0,
            msg: "empty matrix file".into(),
        })?;
        let dim: usize = tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad dimension {tok:?}"),
        })?;
        if !dim.is_power_of_two() {
            return Err(Error::Parse {
                line,
                msg: format!("dimension {dim} is not a power of two"),
            });
        }
        let mut entries = Vec::with_capacity(dim * dim);
        let mut last_line = line;
        for _ in 0..dim * dim {
            let mut part = || -> Result<f64> {
                let (line, tok) = tokens.next().ok_or(Error::Parse {
                    line: last_line,
                    msg: format!("expected {} entries", dim * dim),
                })?;
                last_line = line;
                tok.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {tok:?}"),
                })
            };
            let re = part()?;
            let im = part()?;
            entries.push(Complex64::new(re, im));
        }
        if let Some((line, tok)) = tokens.next() {
            return Err(Error::Parse {
                line,
                msg: format!("trailing token {tok:?}"),
            });
        }
        Self::from_row_major(dim, &entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn text_round_trip() {
        let m = ComplexMatrix::from_fn(4, |r, k| c(r as f64 * 0.1, -(k as f64) / 3.0));
        let back = ComplexMatrix::parse_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_rejects_short_input() {
        let err = ComplexMatrix::parse_text("2\n1 0\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(ComplexMatrix::parse_text("3\n").is_err());
    }

    #[test]
    fn solve_matches_product() {
        let m = ComplexMatrix::from_fn(3, |r, k| c(if r == k { 2.0 } else { 0.3 }, (r + k) as f64 * 0.1));
        let b = vec![c(1.0, 0.0), c(0.0, 1.0), c(-0.5, 0.2)];
        let x = m.solve(&b).unwrap();
        let back = m.mul_vec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_solve_fails() {
        let m = ComplexMatrix::zeros(2);
        assert!(m.solve(&[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn condition_number_of_diagonal() {
        let m = ComplexMatrix::from_real_fn(2, |r, k| if r == k { [4.0, 0.5][r] } else { 0.0 });
        assert!((m.condition_number() - 8.0).abs() < 1e-12);
        assert!((m.spectral_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let m = ComplexMatrix::from_fn(2, |r, k| match (r, k) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            (0, 1) => c(0.5, 0.5),
            _ => c(0.5, -0.5),
        });
        let s = m.hermitian_map(|v| c(v.max(0.0).sqrt(), 0.0));
        assert!(s.matmul(&s).max_abs_diff(&m) < 1e-12);
    }
}
