//! Dense symmetric linear algebra: Jacobi eigendecomposition and functions
//! of SPD matrices evaluated through their spectrum.

mod jacobi;
mod matrix;

pub use jacobi::{MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use matrix::{Matrix, SymMatrix};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigendecomposition `A = U·diag(λ)·Uᵀ` with eigenvalues sorted descending.
///
/// Each eigenvector's first component of magnitude above `√ε` is positive,
/// which makes the output reproducible for a given input.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    values: Vec<T>,
    vectors: Matrix<T>,
}

pub fn eigendecompose<T: Real>(a: &SymMatrix<T>) -> Result<Spectrum<T>> {
    let (values, vectors) = jacobi::cyclic_jacobi(a)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).expect("finite eigenvalues"));

    let sign_floor = T::epsilon().sqrt();
    let mut sorted_vectors = Matrix::zeros(n);
    let mut sorted_values = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        sorted_values.push(values[src]);
        let lead = (0..n).map(|k| vectors.get(k, src)).find(|x| x.abs() > sign_floor);
        let flip = matches!(lead, Some(x) if x < T::zero());
        for k in 0..n {
            let x = vectors.get(k, src);
            sorted_vectors.set(k, col, if flip { -x } else { x });
        }
    }
    Ok(Spectrum { values: sorted_values, vectors: sorted_vectors })
}

impl<T: Real> Spectrum<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> &[T] {
        &self.values
    }

    /// Orthogonal matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn eigenvector(&self, i: usize) -> Vec<T> {
        (0..self.dim()).map(|k| self.vectors.get(k, i)).collect()
    }

    pub fn min_eigenvalue(&self) -> T {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values[0]
    }

    /// Same eigenbasis, every eigenvalue shifted by `shift`. This is the
    /// spectrum of `A + shift·I`.
    pub fn shifted(&self, shift: T) -> Self {
        Self {
            values: self.values.iter().map(|&l| l + shift).collect(),
            vectors: self.vectors.clone(),
        }
    }

    /// Clamps eigenvalues in `[-tol, 0)` to zero; anything below `-tol` is
    /// an error.
    pub fn clamp_psd(&self, tol: T) -> Result<Self> {
        let mut values = self.values.clone();
        for v in values.iter_mut() {
            if *v < -tol {
                return Err(Error::NotPositiveDefinite { eigenvalue: v.as_f64() });
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        Ok(Self { values, vectors: self.vectors.clone() })
    }

    /// `U · diag(f(λ_i)) · Uᵀ`.
    pub fn apply_spectral(&self, f: impl Fn(T) -> T) -> Result<SymMatrix<T>> {
        let mapped = self.map_eigenvalues(f)?;
        self.compose(&mapped)
    }

    /// `U · diag(values) · Uᵀ` for caller-supplied per-direction values.
    pub fn compose(&self, values: &[T]) -> Result<SymMatrix<T>> {
        let n = self.dim();
        if values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for (k, &fk) in values.iter().enumerate() {
                    acc = acc + self.vectors.get(i, k) * fk * self.vectors.get(j, k);
                }
                out[i * n + j] = acc;
                out[j * n + i] = acc;
            }
        }
        SymMatrix::new(n, out)
    }

    /// `f(λ_i)` for every eigenvalue; non-finite results are a `SingularMatrix` error.
    pub fn map_eigenvalues(&self, f: impl Fn(T) -> T) -> Result<Vec<T>> {
        self.values
            .iter()
            .map(|&l| {
                let v = f(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SingularMatrix { eigenvalue: l.as_f64() })
                }
            })
            .collect()
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.apply_spectral(|l| l).expect("finite eigenvalues")
    }

    /// `Σ log λ_i`; fails unless every eigenvalue is strictly positive.
    pub fn log_det(&self) -> Result<T> {
        let mut acc = T::zero();
        for &l in &self.values {
            if !(l > T::zero()) {
                return Err(Error::NotPositiveDefinite { eigenvalue: l.as_f64() });
            }
            acc = acc + l.ln();
        }
        Ok(acc)
    }

    /// Coordinates of `x` in the eigenbasis, `Uᵀx`.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|k| (0..n).fold(T::zero(), |acc, i| acc + self.vectors.get(i, k) * x[i]))
            .collect()
    }

    /// Inverse of [`project`](Self::project), `U·y`.
    pub fn unproject(&self, y: &[T]) -> Vec<T> {
        self.vectors.matvec(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_orthogonal(s: &Spectrum<f64>) {
        let u = s.eigenvectors();
        let utu = u.transpose().matmul(u);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((utu.get(i, j) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_spectrum() {
        let s = eigendecompose(&SymMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert_orthogonal(&s);
        assert!(s.reconstruct().max_abs_diff(&SymMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn diagonal_is_axis_aligned_and_sorted() {
        let a = SymMatrix::diagonal(&[0.5, 2.0]);
        let s = eigendecompose(&a).unwrap();
        assert_eq!(s.eigenvalues(), &[2.0, 0.5]);
        assert_eq!(s.eigenvector(0), vec![0.0, 1.0]);
        assert_eq!(s.eigenvector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn rank_one_two_by_two() {
        // Characteristic polynomial λ² − 0.5λ = 0.
        let a = SymMatrix::<f64>::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        let s = eigendecompose(&a).unwrap();
        assert!((s.eigenvalues()[0] - 0.5).abs() < 1e-15);
        assert!(s.eigenvalues()[1].abs() < 1e-15);
        assert_orthogonal(&s);
        let v = s.eigenvector(0);
        assert!(v[0] > 0.0);
        assert!((v[0] + v[1]).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let a = SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]).unwrap();
        assert!(matches!(eigendecompose(&a), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn apply_inverse_and_sqrt() {
        let s = eigendecompose(&SymMatrix::diagonal(&[2.0, 4.0])).unwrap();
        let inv = s.apply_spectral(|l| 1.0 / l).unwrap();
        assert!(inv.max_abs_diff(&SymMatrix::diagonal(&[0.5, 0.25])) < 1e-15);

        let id = eigendecompose(&SymMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(id.apply_spectral(f64::sqrt).unwrap(), SymMatrix::identity(4));

        // σ² + r²λ = 1 when σ² = r² = 0.5 and λ = 1.
        let g = id.apply_spectral(|l| 1.0 / (0.5 + 0.5 * l)).unwrap();
        assert!(g.max_abs_diff(&SymMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn apply_non_finite_is_singular() {
        let s = eigendecompose(&SymMatrix::diagonal(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            s.apply_spectral(|l| 1.0 / l),
            Err(Error::SingularMatrix { eigenvalue }) if eigenvalue == 0.0
        ));
    }

    #[test]
    fn log_det_cases() {
        let e = std::f64::consts::E;
        let id = eigendecompose(&SymMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(id.log_det().unwrap(), 0.0);
        let s = eigendecompose(&SymMatrix::diagonal(&[e, e * e])).unwrap();
        assert!((s.log_det().unwrap() - 3.0).abs() < 1e-15);
        let z = eigendecompose(&SymMatrix::diagonal(&[1.0, 0.0])).unwrap();
        assert!(matches!(z.log_det(), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn clamp_psd_behaviour() {
        let s = eigendecompose(&SymMatrix::diagonal(&[1.0, -1e-12])).unwrap();
        assert_eq!(s.clamp_psd(1e-10).unwrap().eigenvalues(), &[1.0, 0.0]);
        let bad = eigendecompose(&SymMatrix::diagonal(&[1.0, -1e-6])).unwrap();
        assert!(bad.clamp_psd(1e-10).is_err());
    }

    #[test]
    fn project_roundtrip() {
        let a = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let s = eigendecompose(&a).unwrap();
        let x = [0.7f64, -1.3];
        let back = s.unproject(&s.project(&x));
        assert!((back[0] - x[0]).abs() < 1e-14 && (back[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let a = SymMatrix::<f32>::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = eigendecompose(&a).unwrap();
        assert!(s.reconstruct().max_abs_diff(&a) < 1e-5);
        assert!(s.eigenvalues()[0] > s.eigenvalues()[1]);
    }
}
