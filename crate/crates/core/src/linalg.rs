//! Dense complex linear algebra on row-major square matrices.
//!
//! Thin wrappers over `faer` built without its rayon feature, so every routine
//! runs on the calling thread and results do not depend on the thread pool.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn conj_transpose(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// det(I − self).
    pub fn det_identity_minus(&self) -> Complex64 {
        let n = self.n;
        let m = Mat::from_fn(n, n, |i, j| {
            let v = -self.get(i, j);
            if i == j {
                v + 1.0
            } else {
                v
            }
        });
        m.determinant()
    }

    pub fn determinant(&self) -> Complex64 {
        if self.n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        self.to_faer().determinant()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        self.to_faer().eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.to_faer().singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))
    }

    /// Eigenvalues of a Hermitian matrix, nondecreasing.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.to_faer().self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
    }
}

/// Determinant of a small dense matrix by Gaussian elimination with partial pivoting.
pub fn small_det(n: usize, mut a: Vec<Complex64>) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm())).unwrap();
        if a[piv * n + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= f * v;
            }
        }
    }
    det
}
