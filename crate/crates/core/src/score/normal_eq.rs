//! Direct solution of the training stationarity equations.
//!
//! The expected per-class loss with embedding noise of variance `ν²`, after
//! integrating out `ε` and `δ` and taking the minimum-norm `V`, is
//!
//! ```text
//! J(W, b) = (1/n) Σ‖r W x_i + b‖² + ν²‖b‖² + ‖σW − I‖_F²
//! ```
//!
//! Its gradient vanishes row by row: for output coordinate `p`,
//!
//! ```text
//! [ r²M₂ + σ²I   r x̄   ] [w_p]   [σ e_p]
//! [ r x̄ᵀ        1 + ν² ] [b_p] = [  0  ]
//! ```
//!
//! with `M₂ = (1/n)Σ x_i x_iᵀ` and `x̄ = (1/n)Σ x_i` taken straight from the
//! points. The system is solved with partially pivoted LU and shares no code
//! with the spectral closed forms, so it serves as their oracle.

use crate::error::{Error, Result};
use crate::model::schedule_at;
use crate::spectral::Matrix;

use super::{LinearDenoiser, T_MIN};

pub fn solve_normal_equations(points: &[Vec<f64>], t: f64, nu2: f64) -> Result<LinearDenoiser> {
    let s = schedule_at(t)?;
    if t < T_MIN {
        return Err(Error::ScheduleSingular(t));
    }
    if !(nu2 >= 0.0) || !nu2.is_finite() {
        return Err(Error::InvalidArgument(format!("perturbation variance {nu2} must be >= 0")));
    }
    let n = points.len();
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }

    let nf = n as f64;
    let mut mean = vec![0.0; d];
    let mut second = vec![0.0; d * d];
    for x in points {
        for i in 0..d {
            mean[i] += x[i] / nf;
            for j in 0..d {
                second[i * d + j] += x[i] * x[j] / nf;
            }
        }
    }

    let m = d + 1;
    let mut a = vec![0.0; m * m];
    for i in 0..d {
        for j in 0..d {
            a[i * m + j] = s.r * s.r * second[i * d + j];
        }
        a[i * m + i] += s.sigma * s.sigma;
        a[i * m + d] = s.r * mean[i];
        a[d * m + i] = s.r * mean[i];
    }
    a[d * m + d] = 1.0 + nu2;

    let lu = Lu::factor(m, a)?;
    let mut weight = Matrix::zeros(d);
    let mut bias = vec![0.0; d];
    for p in 0..d {
        let mut rhs = vec![0.0; m];
        rhs[p] = s.sigma;
        let sol = lu.solve(rhs);
        for j in 0..d {
            weight.set(p, j, sol[j]);
        }
        bias[p] = sol[d];
    }
    Ok(LinearDenoiser { schedule: s, weight, bias })
}

/// `J(W, b)` above, evaluated directly.
pub fn expected_loss(points: &[Vec<f64>], t: f64, nu2: f64, weight: &Matrix<f64>, bias: &[f64]) -> Result<f64> {
    let s = schedule_at(t)?;
    let d = bias.len();
    let n = points.len() as f64;
    let mut data_term = 0.0;
    for x in points {
        let wx = weight.matvec(x);
        data_term += wx.iter().zip(bias).map(|(v, b)| (s.r * v + b).powi(2)).sum::<f64>();
    }
    let bias_norm: f64 = bias.iter().map(|b| b * b).sum();
    let mut frob = 0.0;
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            frob += (s.sigma * weight.get(i, j) - id).powi(2);
        }
    }
    Ok(data_term / n + nu2 * bias_norm + frob)
}

struct Lu {
    m: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: usize, mut a: Vec<f64>) -> Result<Self> {
        let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let (piv, pmax) = (k..m)
                .map(|i| (i, a[i * m + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > 1e-14 * scale) {
                return Err(Error::SingularSystem { pivot: pmax });
            }
            if piv != k {
                for j in 0..m {
                    a.swap(k * m + j, piv * m + j);
                }
                perm.swap(k, piv);
            }
            let pivot = a[k * m + k];
            for i in (k + 1)..m {
                let f = a[i * m + k] / pivot;
                a[i * m + k] = f;
                for j in (k + 1)..m {
                    a[i * m + j] -= f * a[k * m + j];
                }
            }
        }
        Ok(Self { m, a, perm })
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..m {
            for j in 0..i {
                x[i] -= self.a[i * m + j] * x[j];
            }
        }
        for i in (0..m).rev() {
            for j in (i + 1)..m {
                x[i] -= self.a[i * m + j] * x[j];
            }
            x[i] /= self.a[i * m + i];
        }
        x
    }
}
