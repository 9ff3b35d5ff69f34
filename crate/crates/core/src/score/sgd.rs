//! Minibatch SGD on the sampled denoising loss with on-the-fly embedding
//! perturbation.
//!
//! Under the minimum-norm embedding map `V = b e_yᵀ` a perturbed embedding
//! `e_y + δ` contributes `b (1 + δ_y)`, so each example needs a single
//! scalar draw of the perturbation.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::model::{schedule_at, Schedule};
use crate::rng::{fill_standard_normal, standard_normal};
use crate::spectral::Matrix;

use super::{CorruptionSpec, LinearDenoiser, Perturbation, T_MIN};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub steps: usize,
    /// Defaults to `0.05 / (1 + σ_t²)`.
    pub learning_rate: Option<f64>,
    pub batch: usize,
    /// Fraction of final iterates averaged into the returned estimate
    /// (Polyak–Ruppert). Zero returns the last iterate.
    pub tail_fraction: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { steps: 50_000, learning_rate: None, batch: 64, tail_fraction: 0.5 }
    }
}

/// One frozen draw of `(x_i, ε, δ)` for a minibatch.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    dim: usize,
    /// `r x_i + σ ε`, row-major `batch × d`.
    inputs: Vec<f64>,
    /// `ε`, row-major `batch × d`.
    targets: Vec<f64>,
    /// `1 + δ`, one per example.
    embed: Vec<f64>,
}

impl MiniBatch {
    pub fn draw<R: Rng + ?Sized>(
        points: &[Vec<f64>],
        schedule: &Schedule,
        spec: &CorruptionSpec,
        batch: usize,
        rng: &mut R,
    ) -> Self {
        let d = points[0].len();
        let mut inputs = vec![0.0; batch * d];
        let mut targets = vec![0.0; batch * d];
        let mut embed = vec![1.0; batch];
        let half_width = spec.magnitude / (d as f64).sqrt();
        let uniform = (half_width > 0.0).then(|| Uniform::new(-half_width, half_width).expect("valid range"));
        for k in 0..batch {
            let x = &points[rng.random_range(0..points.len())];
            let eps = &mut targets[k * d..(k + 1) * d];
            fill_standard_normal(rng, eps);
            for i in 0..d {
                inputs[k * d + i] = schedule.r * x[i] + schedule.sigma * eps[i];
            }
            if spec.magnitude > 0.0 {
                embed[k] += match spec.perturbation {
                    Perturbation::Gaussian => spec.magnitude * standard_normal(rng),
                    Perturbation::Uniform => uniform.as_ref().expect("positive width").sample(rng),
                };
            }
        }
        Self { dim: d, inputs, targets, embed }
    }

    pub fn len(&self) -> usize {
        self.embed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embed.is_empty()
    }

    fn residual(&self, k: usize, weight: &Matrix<f64>, bias: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let u = &self.inputs[k * d..(k + 1) * d];
        let mut res = weight.matvec(u);
        for i in 0..d {
            res[i] += bias[i] * self.embed[k] - self.targets[k * d + i];
        }
        res
    }

    /// Mean of `‖W u + b(1+δ) − ε‖²` over the batch.
    pub fn loss(&self, weight: &Matrix<f64>, bias: &[f64]) -> f64 {
        let total: f64 = (0..self.len())
            .map(|k| self.residual(k, weight, bias).iter().map(|v| v * v).sum::<f64>())
            .sum();
        total / self.len() as f64
    }

    /// Analytic gradient of [`loss`](Self::loss) with respect to `(W, b)`.
    pub fn gradient(&self, weight: &Matrix<f64>, bias: &[f64]) -> (Matrix<f64>, Vec<f64>) {
        let d = self.dim;
        let scale = 2.0 / self.len() as f64;
        let mut gw = Matrix::zeros(d);
        let mut gb = vec![0.0; d];
        for k in 0..self.len() {
            let res = self.residual(k, weight, bias);
            let u = &self.inputs[k * d..(k + 1) * d];
            for i in 0..d {
                let ri = scale * res[i];
                for j in 0..d {
                    gw.as_mut_slice()[i * d + j] += ri * u[j];
                }
                gb[i] += ri * self.embed[k];
            }
        }
        (gw, gb)
    }
}

/// Trains `(W, b)` from zero by plain minibatch SGD with a fresh `(x, ε, δ)`
/// draw every step.
pub fn sgd_train<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    t: f64,
    spec: &CorruptionSpec,
    config: &SgdConfig,
    rng: &mut R,
) -> Result<LinearDenoiser> {
    let schedule = schedule_at(t)?;
    if t < T_MIN {
        return Err(Error::ScheduleSingular(t));
    }
    if points.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if config.steps == 0 || config.batch == 0 {
        return Err(Error::InvalidArgument("steps and batch must be at least 1".into()));
    }
    let lr = config.learning_rate.unwrap_or(0.05 / (1.0 + schedule.sigma * schedule.sigma));
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate {lr} must be positive")));
    }
    if !(0.0..=1.0).contains(&config.tail_fraction) {
        return Err(Error::InvalidArgument("tail_fraction must lie in [0, 1]".into()));
    }

    let d = points[0].len();
    let mut weight = Matrix::zeros(d);
    let mut bias = vec![0.0; d];
    let tail_start = config.steps - ((config.steps as f64 * config.tail_fraction) as usize).max(1);
    let mut avg_w = vec![0.0; d * d];
    let mut avg_b = vec![0.0; d];
    let mut averaged = 0usize;
    let mut initial_loss = None;

    for step in 0..config.steps {
        let batch = MiniBatch::draw(points, &schedule, spec, config.batch, rng);
        let loss = batch.loss(&weight, &bias);
        let reference = *initial_loss.get_or_insert(loss);
        if !loss.is_finite() || loss > 1e6 * reference.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged { step, loss });
        }
        let (gw, gb) = batch.gradient(&weight, &bias);
        for (w, g) in weight.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w -= lr * g;
        }
        for (b, g) in bias.iter_mut().zip(&gb) {
            *b -= lr * g;
        }
        if step >= tail_start {
            averaged += 1;
            for (a, w) in avg_w.iter_mut().zip(weight.as_slice()) {
                *a += w;
            }
            for (a, b) in avg_b.iter_mut().zip(&bias) {
                *a += b;
            }
        }
    }

    let k = averaged as f64;
    let weight = Matrix::new(d, avg_w.into_iter().map(|v| v / k).collect())?;
    let bias = avg_b.into_iter().map(|v| v / k).collect();
    Ok(LinearDenoiser { schedule, weight, bias })
}
