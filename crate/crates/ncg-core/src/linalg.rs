//! Dense complex matrices stored row-major.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NcgError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl TryFrom<MatrixDoc> for ComplexMatrix {
    type Error = String;

    fn try_from(doc: MatrixDoc) -> std::result::Result<Self, String> {
        if doc.entries.len() != doc.rows * doc.cols {
            return Err(format!(
                "matrix declares {}x{} but has {} entries",
                doc.rows,
                doc.cols,
                doc.entries.len()
            ));
        }
        Ok(Self { rows: doc.rows, cols: doc.cols, data: doc.entries })
    }
}

impl From<ComplexMatrix> for MatrixDoc {
    fn from(m: ComplexMatrix) -> Self {
        Self { rows: m.rows, cols: m.cols, entries: m.data }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major entries; panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data: data.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn column(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn scalar(n: usize, z: C64) -> Self {
        Self::identity(n).scale(z)
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (k, &z) in d.iter().enumerate() {
            m[(k, k)] = z;
        }
        m
    }

    /// Permutation taking `C^a ⊗ C^b` to `C^b ⊗ C^a`.
    pub fn swap(a: usize, b: usize) -> Self {
        let mut m = Self::zeros(a * b, a * b);
        for x in 0..a {
            for y in 0..b {
                m[(y * a + x, x * b + y)] = ONE;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|w| w * z).collect() }
    }

    pub fn scale_re(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch {:?} * {:?}", self.shape(), rhs.shape());
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for r in 0..self.rows {
            let orow = &mut out.data[r * n..(r + 1) * n];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        let (p, q) = rhs.shape();
        Self::from_fn(self.rows * p, self.cols * q, |r, c| self[(r / p, c / q)] * rhs[(r % p, c % q)])
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn anticommutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) + &rhs.matmul(self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|k| self[(k, k)]).sum()
    }

    /// Frobenius inner product `tr(self† rhs)`.
    pub fn inner(&self, rhs: &Self) -> C64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data.iter().zip(&rhs.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }

    pub fn dist(&self, rhs: &Self) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "dist shape mismatch");
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for r in 0..b.rows {
            for c in 0..b.cols {
                self[(r0 + r, c0 + c)] = b[(r, c)];
            }
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for r in 0..b.rows {
            for c in 0..b.cols {
                self[(r0 + r, c0 + c)] += b[(r, c)];
            }
        }
    }

    pub fn direct_sum(blocks: &[Self]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.dist(&self.adjoint())
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        if !self.is_square() {
            return Err(NcgError::Shape(format!("eigh needs a square matrix, got {:?}", self.shape())));
        }
        let n = self.rows;
        if n == 0 {
            return Ok((Vec::new(), Self::zeros(0, 0)));
        }
        let eig = self.hermitian_part().to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok((values, vectors))
    }

    pub fn eigvalsh(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.0)
    }

    /// Moore-Penrose inverse of a Hermitian positive semidefinite matrix.
    pub fn psd_pinv(&self, cutoff: f64) -> Result<Self> {
        let (vals, vecs) = self.eigh()?;
        let inv: Vec<C64> =
            vals.iter().map(|&l| if l > cutoff { C64::new(1.0 / l, 0.0) } else { ZERO }).collect();
        Ok(vecs.matmul(&Self::diagonal(&inv)).matmul(&vecs.adjoint()))
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows == 0 || self.cols == 0 {
            return Vec::new();
        }
        let mut s: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨x, y⟩`, antilinear in the first slot.
pub fn vdot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_transposes_kron_vectors() {
        let x = ComplexMatrix::column(&[c(1.0, 0.0), c(2.0, 1.0)]);
        let y = ComplexMatrix::column(&[c(0.0, 1.0), c(3.0, 0.0), c(-1.0, 0.0)]);
        let s = ComplexMatrix::swap(2, 3);
        assert!(s.matmul(&x.kron(&y)).dist(&y.kron(&x)) < 1e-15);
        assert!(s.adjoint().matmul(&s).dist(&ComplexMatrix::identity(6)) < 1e-15);
    }

    #[test]
    fn eigh_reconstructs() {
        let m = ComplexMatrix::from_vec(2, 2, vec![c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)]);
        let (vals, vecs) = m.eigh().unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let d = ComplexMatrix::diagonal(&vals.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
        assert!(vecs.matmul(&d).matmul(&vecs.adjoint()).dist(&m) < 1e-12);
    }

    #[test]
    fn kron_mixed_product() {
        let a = ComplexMatrix::from_fn(2, 2, |r, k| c(r as f64, k as f64 + 1.0));
        let b = ComplexMatrix::from_fn(3, 3, |r, k| c((r * k) as f64, -1.0));
        let lhs = a.kron(&b).matmul(&a.kron(&b));
        let rhs = a.matmul(&a).kron(&b.matmul(&b));
        assert!(lhs.dist(&rhs) < 1e-10);
    }

    #[test]
    fn serde_rejects_bad_length() {
        let bad = r#"{"rows":2,"cols":2,"entries":[[1.0,0.0]]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(bad).is_err());
        let ok = r#"{"rows":1,"cols":1,"entries":[[1.0,-2.0]]}"#;
        let m: ComplexMatrix = serde_json::from_str(ok).unwrap();
        assert_eq!(m[(0, 0)], c(1.0, -2.0));
    }
}
