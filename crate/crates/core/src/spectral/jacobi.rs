use crate::error::{Error, Result};
use crate::scalar::Real;

use super::matrix::{Matrix, SymMatrix};

/// Relative off-diagonal Frobenius threshold at which sweeping stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations. Returns unsorted `(eigenvalues, eigenvectors)`
/// with eigenvectors as columns.
pub(super) fn cyclic_jacobi<T: Real>(a: &SymMatrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut v = Matrix::<T>::zeros(n);
    for i in 0..n {
        v.set(i, i, T::one());
    }

    // For f32 the absolute floor of 1e-12 is below rounding noise.
    let rel = T::lit(OFF_DIAGONAL_TOL).max(T::epsilon() * T::lit(4.0));
    let threshold = rel * a.frobenius_norm();

    let off_norm = |m: &[T]| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&m);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off.as_f64() });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = if (theta * theta).is_finite() {
                    let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() { -t } else { t }
                } else {
                    T::lit(0.5) / theta
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let values = (0..n).map(|i| m[i * n + i]).collect();
    Ok((values, v))
}
