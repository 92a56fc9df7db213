//! Small dense complex linear algebra: column-major matrices, inner products
//! and a Jacobi eigensolver for the dominant direction of a Gram matrix.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense complex matrix stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    /// Builds a matrix from its columns. All columns must share one length.
    pub fn from_columns(columns: &[Vec<Complex<T>>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns of unequal length".to_string(),
            ));
        }
        let data = columns.iter().flatten().copied().collect();
        Ok(CMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[Complex<T>] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [Complex<T>] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex<T>]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex<T>) {
        self.data[j * self.rows + i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |m, x| m.max(x))
    }

    /// Converts the scalar type, e.g. to run the same realization in `f32`.
    pub fn cast<U: Real>(&self) -> CMatrix<U> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy())))
                .collect(),
        }
    }
}

/// `aᴴ b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}

pub fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn scale<T: Real>(a: &[Complex<T>], s: T) -> Vec<Complex<T>> {
    a.iter().map(|z| z * s).collect()
}

/// Rotates `v` so that its largest-magnitude entry (first on ties) is real and
/// positive.
pub fn normalize_phase<T: Real>(v: &mut [Complex<T>]) {
    let mut best = 0;
    let mut best_mag = T::neg_infinity();
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > T::zero() {
        let rot = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z = *z * rot;
        }
        v[best] = Complex::new(v[best].re, T::zero());
    }
}

/// Eigen-decomposition of a real symmetric `n x n` matrix (row-major) by cyclic
/// Jacobi rotations. Returns eigenvalues and the eigenvectors as columns of a
/// row-major matrix, both in the solver's native (unsorted) order.
pub fn symmetric_eigen<T: Real>(matrix: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob: T = a.iter().map(|x| *x * *x).sum();
    let tol = T::epsilon() * T::epsilon() * frob;
    let two = T::lit(2.0);

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i * n + i]).collect();
    (eigenvalues, v)
}

/// Dominant eigenpair of a Hermitian matrix given as an `n x n` column-major
/// complex matrix. Solved through the real `2n x 2n` embedding
/// `[[Re, -Im], [Im, Re]]`; the returned vector has unit norm and is
/// phase-normalized by [`normalize_phase`].
pub fn dominant_eigenpair_hermitian<T: Real>(a: &CMatrix<T>) -> (T, Vec<Complex<T>>) {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let m = 2 * n;
    let mut embed = vec![T::zero(); m * m];
    for j in 0..n {
        for i in 0..n {
            let z = a.get(i, j);
            embed[i * m + j] = z.re;
            embed[(i + n) * m + (j + n)] = z.re;
            embed[(i + n) * m + j] = z.im;
            embed[i * m + (j + n)] = -z.im;
        }
    }
    let (values, vectors) = symmetric_eigen(&embed, m);
    let mut best = 0;
    for (i, &lam) in values.iter().enumerate() {
        if lam > values[best] {
            best = i;
        }
    }
    let mut vec: Vec<Complex<T>> = (0..n)
        .map(|i| Complex::new(vectors[i * m + best], vectors[(i + n) * m + best]))
        .collect();
    let nrm = norm_sqr(&vec).sqrt();
    if nrm > T::zero() {
        for z in vec.iter_mut() {
            *z = *z / nrm;
        }
    }
    normalize_phase(&mut vec);
    (values[best], vec)
}

/// Dominant left singular vector of `h` (unit norm, phase-normalized) and the
/// corresponding squared singular value. Works on whichever Gram matrix is
/// smaller: `h hᴴ` directly, or `hᴴ h` followed by `u = h v / ‖h v‖`.
pub fn dominant_left_singular<T: Real>(h: &CMatrix<T>) -> (T, Vec<Complex<T>>) {
    let (rows, cols) = (h.rows(), h.cols());
    if rows <= cols {
        let mut gram = CMatrix::zeros(rows, rows);
        for i in 0..rows {
            for j in 0..rows {
                let mut acc = Complex::new(T::zero(), T::zero());
                for col in h.columns() {
                    acc = acc + col[i] * col[j].conj();
                }
                gram.set(i, j, acc);
            }
        }
        dominant_eigenpair_hermitian(&gram)
    } else {
        let mut gram = CMatrix::zeros(cols, cols);
        for i in 0..cols {
            for j in 0..cols {
                gram.set(i, j, inner(h.column(i), h.column(j)));
            }
        }
        let (lam, v) = dominant_eigenpair_hermitian(&gram);
        let mut u = vec![Complex::new(T::zero(), T::zero()); rows];
        for (j, col) in h.columns().enumerate() {
            for (ui, hij) in u.iter_mut().zip(col) {
                *ui = *ui + hij * v[j];
            }
        }
        let nrm = norm_sqr(&u).sqrt();
        if nrm > T::zero() {
            for z in u.iter_mut() {
                *z = *z / nrm;
            }
        }
        normalize_phase(&mut u);
        (lam, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let rec: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert!((rec - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_dominant_pair_of_rank_one() {
        // a = x xᴴ with x = (1, i, 0): eigenvalue 2, eigenvector x/√2 up to phase.
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        let mut a = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, x[i] * x[j].conj());
            }
        }
        let (lam, v) = dominant_eigenpair_hermitian(&a);
        assert!((lam - 2.0).abs() < 1e-12);
        let overlap = inner(&v, &x).norm() / 2.0_f64.sqrt();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn left_singular_of_single_column_is_normalized_column() {
        let h = CMatrix::from_columns(&[vec![c(0.0, 3.0), c(4.0, 0.0)]]).unwrap();
        let (s2, u) = dominant_left_singular(&h);
        assert!((s2 - 25.0).abs() < 1e-12);
        // Largest entry (4) becomes real positive.
        assert!((u[1] - c(0.8, 0.0)).norm() < 1e-12);
        assert!((u[0].norm() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn normalize_phase_makes_largest_entry_real_positive() {
        let mut v = vec![c(0.1, 0.0), c(0.0, -2.0)];
        normalize_phase(&mut v);
        assert!((v[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((v[0].norm() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn from_columns_rejects_ragged_input() {
        let cols = vec![vec![c(1.0, 0.0)], vec![c(1.0, 0.0), c(2.0, 0.0)]];
        assert!(CMatrix::from_columns(&cols).is_err());
    }
}
