//! Dense complex linear algebra for operators of dimension up to 64.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used by every Hermitian-flagged operation.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-10;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix shape {rows}x{cols} must be positive"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Outer product `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j].conj();
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    /// Entrywise complex conjugate (in the computational basis).
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest entrywise modulus of `self - other`. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |M - M^dagger|` entrywise; infinite for non-square matrices.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(())
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
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
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
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Eigen-decomposition of a Hermitian matrix: `m = U diag(values) U^dagger`,
/// eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let lam = self.values[k];
            for i in 0..n {
                let uik = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += uik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi. Works in place on `a` (square, row-major, Hermitian)
/// and optionally accumulates the rotations into `v`. Returns the unsorted
/// diagonal.
fn jacobi_in_place(n: usize, a: &mut [C64], mut v: Option<&mut [C64]>) -> Vec<f64> {
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let threshold = JACOBI_OFF_TOL * scale;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                // Rotation is numerically irrelevant once the entry is below
                // the rounding level of both diagonal entries.
                if g < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = C64::new(0.0, 0.0);
                    a[q * n + p] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / g; // e^{i phi}
                let theta = (aqq - app) / (2.0 * g);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;

                // A <- A J (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * jpp + akq * jqp;
                    a[k * n + q] = akp * jpq + akq * jqq;
                }
                // A <- J^dagger A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;

                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * jpp + vkq * jqp;
                        v[k * n + q] = vkp * jpq + vkq * jqq;
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i].re).collect()
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    m.ensure_hermitian()?;
    let n = m.rows;
    let mut a = m.data.clone();
    // Symmetrize so the rotations act on an exactly Hermitian matrix.
    for i in 0..n {
        a[i * n + i].im = 0.0;
        for j in (i + 1)..n {
            let avg = (a[i * n + j] + a[j * n + i].conj()) * 0.5;
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n).data;
    let diag = jacobi_in_place(n, &mut a, Some(&mut v));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[r * n + src];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending. Skips the Hermitian check; callers pass
/// matrices that are Hermitian by construction.
pub fn eigvals_hermitian_unchecked(n: usize, entries: &[C64]) -> Vec<f64> {
    debug_assert_eq!(entries.len(), n * n);
    let mut vals = match n {
        1 => vec![entries[0].re],
        2 => {
            let a = entries[0].re;
            let d = entries[3].re;
            let b = entries[1].norm_sqr();
            let mean = 0.5 * (a + d);
            let half = 0.5 * (a - d);
            let r = (half * half + b).sqrt();
            vec![mean - r, mean + r]
        }
        _ => {
            let mut a = entries.to_vec();
            jacobi_in_place(n, &mut a, None)
        }
    };
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn eigvals_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.ensure_hermitian()?;
    Ok(eigvals_hermitian_unchecked(m.rows, &m.data))
}

/// Applies the clamping rule to a spectrum: values in `[-PSD_TOL, 0)` become
/// zero, anything more negative is an error.
pub fn clamp_psd_spectrum(values: &mut [f64]) -> Result<()> {
    for v in values.iter_mut() {
        if *v < -PSD_TOL {
            return Err(Error::NotPsd { eigenvalue: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// `f(m) = U diag(f(lambda)) U^dagger` for a Hermitian `m`.
fn spectral_map(eig: &HermitianEigen, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let n = eig.values.len();
    let fl: Vec<C64> = eig.values.iter().map(|&l| f(l)).collect();
    let u = &eig.vectors;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let uik = u[(i, k)] * fl[k];
            if uik == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += uik * u[(j, k)].conj();
            }
        }
    }
    out
}

/// `exp(i h)` for Hermitian `h`, via its eigen-decomposition.
pub fn unitary_from_generator(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(h)?;
    Ok(spectral_map(&eig, |l| C64::from_polar(1.0, l)))
}

/// Principal square root of a Hermitian PSD matrix.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut eig = eig_hermitian(m)?;
    clamp_psd_spectrum(&mut eig.values)?;
    Ok(spectral_map(&eig, |l| C64::new(l.sqrt(), 0.0)))
}

/// `max |U^dagger U - I|` entrywise.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let g = u.adjoint().matmul(u).expect("adjoint product");
    g.max_abs_diff(&ComplexMatrix::identity(u.cols))
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt).
pub fn orthonormalize_columns(m: &mut ComplexMatrix) {
    let (rows, cols) = (m.rows, m.cols);
    for c in 0..cols {
        for prev in 0..c {
            let mut dot = C64::new(0.0, 0.0);
            for r in 0..rows {
                dot += m[(r, prev)].conj() * m[(r, c)];
            }
            for r in 0..rows {
                let sub = m[(r, prev)] * dot;
                m[(r, c)] -= sub;
            }
        }
        let norm = (0..rows).map(|r| m[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in 0..rows {
                m[(r, c)] /= norm;
            }
        }
    }
}
