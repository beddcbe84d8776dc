//! Dense complex and real linear algebra used throughout the simulator.
//!
//! Complex matrices are kept explicitly; the real block expansion
//!
//! ```text
//! expand(A) = [ Re(A)  -Im(A) ]        expand(v) = [ Re(v) ]
//!             [ Im(A)   Re(A) ]                    [ Im(v) ]
//! ```
//!
//! is built on demand. It is a ring homomorphism, so `expand(A) * expand(v)`
//! equals `expand(A * v)`, which is what lets a real-valued crossbar process
//! complex channel data.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense row-major complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad shapes and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// Column vector from entries.
    pub fn column(entries: Vec<Complex64>) -> Result<Self> {
        let n = entries.len();
        Self::from_vec(n, 1, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|x| x * factor)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::invalid(format!(
                "vector of length {} does not match {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ * v` without materializing the transpose.
    pub fn matvec_transposed(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::invalid(format!(
                "vector of length {} does not match {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::invalid("symmetrization needs a square matrix"));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = m;
                out[(j, i)] = m;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Which real embedding an [`ExpandedReal`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `[[Re, -Im], [Im, Re]]`
    MatrixBlock,
    /// `[Re; Im]`
    VectorStack,
}

/// Real block expansion of a complex matrix or vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedReal {
    values: RealMatrix,
    layout: Layout,
}

impl ExpandedReal {
    /// Wraps an existing real matrix; callers vouch for the layout.
    pub fn new(values: RealMatrix, layout: Layout) -> Result<Self> {
        if values.rows() % 2 != 0 {
            return Err(Error::invalid("expanded form needs an even row count"));
        }
        match layout {
            Layout::VectorStack if values.cols() != 1 => {
                return Err(Error::invalid("vector layout needs a single column"))
            }
            Layout::MatrixBlock if values.cols() % 2 != 0 => {
                return Err(Error::invalid("matrix layout needs an even column count"))
            }
            _ => {}
        }
        Ok(Self { values, layout })
    }

    /// Stacked vector `[re; im]` given as a flat slice.
    pub fn vector(stacked: Vec<f64>) -> Result<Self> {
        let n = stacked.len();
        Self::new(RealMatrix::from_vec(n, 1, stacked)?, Layout::VectorStack)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.values
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.values
    }

    /// Entries of a vector-layout value (row-major for matrices).
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn len(&self) -> usize {
        self.values.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gram matrix `H Hᴴ`.
pub fn gram(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.rows() == 0 || h.cols() == 0 {
        return Err(Error::invalid("gram of an empty matrix"));
    }
    let (k, m) = (h.rows(), h.cols());
    let mut z = ComplexMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..m {
                acc += h[(i, c)] * h[(j, c)].conj();
            }
            z[(i, j)] = acc;
            z[(j, i)] = acc.conj();
        }
        // Exactly real diagonal.
        z[(i, i)] = Complex64::new(z[(i, i)].re, 0.0);
    }
    Ok(z)
}

pub fn expand_matrix(a: &ComplexMatrix) -> ExpandedReal {
    let (p, q) = (a.rows(), a.cols());
    let mut out = RealMatrix::zeros(2 * p, 2 * q);
    for i in 0..p {
        for j in 0..q {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + q)] = -z.im;
            out[(i + p, j)] = z.im;
            out[(i + p, j + q)] = z.re;
        }
    }
    ExpandedReal {
        values: out,
        layout: Layout::MatrixBlock,
    }
}

pub fn expand_vector(v: &ComplexMatrix) -> Result<ExpandedReal> {
    if v.cols() != 1 {
        return Err(Error::invalid(format!(
            "expand_vector needs a column vector, got {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    let mut stacked: Vec<f64> = v.as_slice().iter().map(|z| z.re).collect();
    stacked.extend(v.as_slice().iter().map(|z| z.im));
    ExpandedReal::vector(stacked)
}

/// Inverse of [`expand_vector`] on a flat `[re; im]` slice.
pub fn collapse_vector(stacked: &[f64]) -> Result<ComplexMatrix> {
    if stacked.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "cannot collapse a vector of odd length {}",
            stacked.len()
        )));
    }
    let p = stacked.len() / 2;
    let entries = (0..p).map(|i| Complex64::new(stacked[i], stacked[i + p])).collect();
    ComplexMatrix::column(entries)
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &RealMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::invalid(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if n == 0 {
            return Err(Error::invalid("LU of an empty matrix"));
        }
        let scale = a.norm_inf();
        let tiny = (n as f64) * f64::EPSILON * scale;
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, lu[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs > tiny) {
                return Err(Error::SingularMatrix {
                    column: col,
                    pivot: pivot_abs,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= factor * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::invalid(format!(
                "right-hand side of length {} for a {n}x{n} system",
                b.len()
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_dense(a: &RealMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactors::new(a)?.solve(b)
}

/// Smallest eigenvalue of the symmetric part of `a`.
///
/// Inverse iteration shifted to the Gershgorin lower bound, so the iteration
/// always converges toward the bottom of the spectrum even for indefinite
/// input. Converged when the eigen-residual drops below `1e-13 · ‖A‖∞`.
pub fn min_eigenvalue_sym(a: &RealMatrix) -> Result<f64> {
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("eigenvalue of a matrix with non-finite entries"));
    }
    let sym = a.symmetrized()?;
    let n = sym.rows();
    if n == 0 {
        return Err(Error::invalid("eigenvalue of an empty matrix"));
    }
    if n == 1 {
        return Ok(sym[(0, 0)]);
    }
    let scale = sym.norm_inf();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let gershgorin = (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| sym[(i, j)].abs()).sum();
            sym[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min);
    // Keep the shifted matrix strictly positive definite.
    let shift = gershgorin - 1e-3 * scale;
    let mut shifted = sym.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = LuFactors::new(&shifted)?;

    // Deterministic start with every component nonzero.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64).collect();
    normalize(&mut x);
    let tol = 1e-13 * scale;
    let mut lambda = rayleigh(&sym, &x);
    for _ in 0..20_000 {
        let mut next = lu.solve(&x)?;
        normalize(&mut next);
        x = next;
        lambda = rayleigh(&sym, &x);
        let ax = sym.matvec(&x)?;
        let residual = ax
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol {
            break;
        }
    }
    Ok(lambda)
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn rayleigh(a: &RealMatrix, x: &[f64]) -> f64 {
    let ax = a.matvec(x).expect("square");
    ax.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Euclidean norm of a real vector.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        // Small LCG keeps these tests independent of the RNG module.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let data = (0..rows * cols).map(|_| c(next(), next())).collect();
        ComplexMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn assert_close(a: &RealMatrix, b: &RealMatrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn gram_examples() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        assert_eq!(gram(&h).unwrap()[(0, 0)], c(1.0, 0.0));

        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        assert_eq!(gram(&h).unwrap()[(0, 0)], c(2.0, 0.0));

        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(-1.0, 0.0)]]).unwrap();
        let z = gram(&h).unwrap();
        assert_eq!(z[(0, 0)], c(2.0, 0.0));
        assert_eq!(z[(0, 1)], c(0.0, 0.0));
        assert_eq!(z[(1, 0)], c(0.0, 0.0));
        assert_eq!(z[(1, 1)], c(2.0, 0.0));
    }

    #[test]
    fn gram_rejects_empty() {
        assert!(matches!(gram(&ComplexMatrix::zeros(0, 3)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn expand_examples() {
        let one = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        assert_eq!(
            expand_matrix(&one).into_matrix(),
            RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
        );
        let j = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        assert_eq!(
            expand_matrix(&j).into_matrix(),
            RealMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn expand_vector_round_trip() {
        let v = ComplexMatrix::column(vec![c(1.0, 2.0)]).unwrap();
        let e = expand_vector(&v).unwrap();
        assert_eq!(e.as_slice(), &[1.0, 2.0]);
        assert_eq!(collapse_vector(&[1.0, 2.0]).unwrap(), v);
        assert!(matches!(collapse_vector(&[1.0, 2.0, 3.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn expanded_adjoint_times_vector() {
        let h = random_complex(2, 3, 11);
        let y = random_complex(2, 1, 12);
        let direct = expand_vector(&h.adjoint().matmul(&y).unwrap()).unwrap();
        let via = expand_matrix(&h.adjoint())
            .matrix()
            .matvec(expand_vector(&y).unwrap().as_slice())
            .unwrap();
        for (a, b) in direct.as_slice().iter().zip(&via) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn solve_dense_examples() {
        let x = solve_dense(&RealMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = RealMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(solve_dense(&a, &[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn solve_dense_singular() {
        let a = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_dense(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_examples() {
        let d = RealMatrix::from_diagonal(&[2.0, 4.0]);
        assert!((min_eigenvalue_sym(&d).unwrap() - 2.0).abs() < 1e-12);
        assert!((min_eigenvalue_sym(&RealMatrix::identity(5)).unwrap() - 1.0).abs() < 1e-12);
        let a = RealMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((min_eigenvalue_sym(&a).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn min_eigenvalue_rejects_nan() {
        let mut a = RealMatrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(min_eigenvalue_sym(&a).is_err());
    }

    fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), rows * cols).prop_map(move |v| {
            ComplexMatrix::from_vec(rows, cols, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn expansion_is_a_homomorphism(
            a in complex_matrix(3, 2),
            b in complex_matrix(2, 4),
            a2 in complex_matrix(3, 2),
        ) {
            let prod = expand_matrix(&a.matmul(&b).unwrap());
            let via = expand_matrix(&a).matrix().matmul(expand_matrix(&b).matrix()).unwrap();
            assert_close(prod.matrix(), &via, 1e-12);

            let sum = expand_matrix(&a.add(&a2).unwrap());
            let via = expand_matrix(&a).matrix().add(expand_matrix(&a2).matrix()).unwrap();
            assert_close(sum.matrix(), &via, 1e-12);

            let adj = expand_matrix(&a.adjoint());
            assert_close(adj.matrix(), &expand_matrix(&a).matrix().transpose(), 0.0);
        }

        #[test]
        fn gram_is_hermitian_psd(h in complex_matrix(4, 9)) {
            let z = gram(&h).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(z[(i, j)], z[(j, i)].conj());
                }
            }
            let lam = min_eigenvalue_sym(expand_matrix(&z).matrix()).unwrap();
            prop_assert!(lam >= -1e-10);
        }

        #[test]
        fn solve_dense_residual_bound(
            entries in proptest::collection::vec(-1.0f64..1.0, 64),
            b in proptest::collection::vec(-5.0f64..5.0, 8),
        ) {
            let mut a = RealMatrix::from_vec(8, 8, entries).unwrap();
            for i in 0..8 {
                a[(i, i)] += 8.0;
            }
            let x = solve_dense(&a, &b).unwrap();
            let ax = a.matvec(&x).unwrap();
            let res = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let xinf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let binf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(res <= 1e-9 * (a.norm_inf() * xinf + binf));
        }

        #[test]
        fn min_eigenvalue_matches_full_decomposition(
            n in 1usize..=6,
            entries in proptest::collection::vec(-3.0f64..3.0, 36),
        ) {
            let a = RealMatrix::from_vec(n, n, entries[..n * n].to_vec()).unwrap();
            let sym = a.symmetrized().unwrap();
            let oracle = nalgebra::DMatrix::from_row_slice(n, n, sym.as_slice())
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let got = min_eigenvalue_sym(&a).unwrap();
            // Relative tolerance, floored for eigenvalues that sit near zero.
            let tol = 1e-6 * oracle.abs().max(1e-3 * sym.norm_inf());
            prop_assert!((got - oracle).abs() <= tol, "got {got}, oracle {oracle}");
        }
    }
}
