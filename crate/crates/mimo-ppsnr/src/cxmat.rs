//! Dense complex matrices sized for link-level work (everything here is
//! at most a handful of rows), stored row-major.
//!
//! Two inversion routines are provided: [`CMat::inv_hpd`] (Cholesky) for the
//! regularized Gram matrices that are Hermitian positive definite by
//! construction, and [`CMat::inv_general`] (LU with partial pivoting) for the
//! training-signal Gram and for test oracles.

use num_complex::Complex64;

use crate::{Error, Result};

/// Entrywise tolerance (relative to the largest modulus) for treating a
/// matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative Frobenius residual `‖A·A⁻¹ − I‖_F / √n` both inverses must meet.
pub const INV_RESIDUAL_TOL: f64 = 1e-9;
/// LU pivots below this fraction of `‖A‖_F` are treated as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf components
    /// and length mismatches.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        for (idx, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    /// Builds from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Convenience constructor from rows of (re, im) pairs; panics on ragged
    /// input. Intended for literals in tests and examples.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        let data = rows.iter().flatten().copied().collect();
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Matrix product; rejects non-conforming shapes.
    pub fn matmul(&self, rhs: &CMat) -> Result<CMat> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Complex64::ZERO;
                for k in 0..self.cols {
                    acc += self.get(r, k) * rhs.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    /// Matrix-vector product; panics on length mismatch.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "mul_vec length mismatch");
        let mut out = vec![Complex64::ZERO; self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::ZERO;
            for c in 0..self.cols {
                acc += self.get(r, c) * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Sum of diagonal entries; rejects non-square input.
    pub fn trace(&self) -> Result<Complex64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise `A = A^H` check, relative to the largest modulus.
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs();
        for r in 0..self.rows {
            for c in r..self.cols {
                if (self.get(r, c) - self.get(c, r).conj()).norm() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn scale(&self, s: f64) -> CMat {
        self.scale_cx(Complex64::new(s, 0.0))
    }

    pub fn scale_cx(&self, s: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMat) -> Result<CMat> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMat) -> Result<CMat> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &CMat, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Inverse of a Hermitian positive definite matrix via Cholesky.
    ///
    /// Computed as `L⁻ᴴ·L⁻¹`, so the result is Hermitian by construction.
    /// Non-Hermitian or indefinite input is rejected, never silently
    /// factorized.
    pub fn inv_hpd(&self) -> Result<CMat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !self.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHpd {
                col: 0,
                pivot: f64::NAN,
            });
        }
        let l = self.cholesky_lower()?;
        let linv = lower_triangular_inverse(&l);
        linv.hermitian().matmul(&linv)
    }

    /// Lower Cholesky factor `L` with `L·L^H = A`.
    fn cholesky_lower(&self) -> Result<CMat> {
        let n = self.rows;
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l.get(j, k).norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotHpd { col: j, pivot: d });
            }
            let djj = d.sqrt();
            l.set(j, j, Complex64::new(djj, 0.0));
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(l)
    }

    /// Inverse of a general square matrix via LU with partial pivoting.
    ///
    /// Pivots smaller than [`SINGULAR_PIVOT_TOL`]`·‖A‖_F` are reported as
    /// singular.
    pub fn inv_general(&self) -> Result<CMat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let norm = self.frob_norm();
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, lu.get(r, col).norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty column");
            if pivot_mag < SINGULAR_PIVOT_TOL * norm || pivot_mag == 0.0 {
                return Err(Error::Singular {
                    col,
                    pivot: pivot_mag,
                });
            }
            if pivot_row != col {
                for c in 0..n {
                    let tmp = lu.get(col, c);
                    lu.set(col, c, lu.get(pivot_row, c));
                    lu.set(pivot_row, c, tmp);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu.get(col, col);
            for r in (col + 1)..n {
                let factor = lu.get(r, col) / pivot;
                lu.set(r, col, factor);
                for c in (col + 1)..n {
                    let v = lu.get(r, c) - factor * lu.get(col, c);
                    lu.set(r, c, v);
                }
            }
        }

        // Solve A·x = e_j for each unit vector through the LU factors.
        let mut inv = CMat::zeros(n, n);
        let mut y = vec![Complex64::ZERO; n];
        for j in 0..n {
            for i in 0..n {
                let b = if perm[i] == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                };
                let mut acc = b;
                for k in 0..i {
                    acc -= lu.get(i, k) * y[k];
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for k in (i + 1)..n {
                    acc -= lu.get(i, k) * inv.get(k, j);
                }
                inv.set(i, j, acc / lu.get(i, i));
            }
        }
        Ok(inv)
    }
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn lower_triangular_inverse(l: &CMat) -> CMat {
    let n = l.rows();
    let mut x = CMat::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let mut acc = if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            };
            for k in j..i {
                acc -= l.get(i, k) * x.get(k, j);
            }
            x.set(i, j, acc / l.get(i, i));
        }
    }
    x
}

impl std::ops::Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("matmul shape mismatch")
    }
}

impl std::ops::Mul<&CMat> for CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("matmul shape mismatch")
    }
}

impl std::ops::Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        CMat::add(self, rhs).expect("add shape mismatch")
    }
}

impl std::ops::Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        CMat::sub(self, rhs).expect("sub shape mismatch")
    }
}
