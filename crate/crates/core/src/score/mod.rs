//! Optimal linear denoisers and the conditional scores they induce.
//!
//! Per class the denoiser is `ε_θ(x_t) = W x_t + b`. With training-time
//! embedding noise of per-coordinate variance `ν²` the optimum is
//!
//! ```text
//! W = σ_t (σ_t² I + r_t² S)⁻¹,   b = −α r_t W μ̂,   α = 1/(1+ν²)
//! ```
//!
//! where `S` is the effective covariance of [`EffectiveScoreSpec`]: `Σ` when
//! clean, `Σ + ν²/(1+ν²)·‖μ̂‖² I` in the isotropic form, and
//! `Σ + ν²/(1+ν²)·μ̂μ̂ᵀ` in the rank-one form. The rank-one form is what the
//! stationarity equations solved by [`solve_normal_equations`] produce. The
//! two agree when `d = 1`; the isotropic form is the default for metrics.

mod normal_eq;
mod sgd;

pub use normal_eq::{expected_loss, solve_normal_equations};
pub use sgd::{sgd_train, MiniBatch, SgdConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{schedule_at, ClassStats, Schedule};
use crate::spectral::{eigendecompose, Matrix, Spectrum, SymMatrix};

/// Scores are not evaluated below this time; `σ_t → 0` there.
pub const T_MIN: f64 = 1e-6;

/// Default floor on `λ_min(S)` for [`effective_spec`].
pub const FULL_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    /// `δ = γ ξ`, `ξ ~ N(0, I)`.
    Gaussian,
    /// `δ ~ U(−γ/√d, γ/√d)` per coordinate.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorruptionForm {
    #[serde(rename = "isotropic")]
    Isotropic,
    #[serde(rename = "rank-one")]
    RankOne,
}

impl CorruptionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionForm::Isotropic => "isotropic",
            CorruptionForm::RankOne => "rank-one",
        }
    }
}

impl Perturbation {
    pub fn as_str(self) -> &'static str {
        match self {
            Perturbation::Gaussian => "gaussian",
            Perturbation::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub magnitude: f64,
    pub perturbation: Perturbation,
    pub form: CorruptionForm,
}

impl CorruptionSpec {
    pub fn new(magnitude: f64, perturbation: Perturbation, form: CorruptionForm) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!("corruption magnitude {magnitude} must be >= 0")));
        }
        Ok(Self { magnitude, perturbation, form })
    }

    pub fn clean() -> Self {
        Self { magnitude: 0.0, perturbation: Perturbation::Gaussian, form: CorruptionForm::Isotropic }
    }

    pub fn gaussian(magnitude: f64, form: CorruptionForm) -> Result<Self> {
        Self::new(magnitude, Perturbation::Gaussian, form)
    }

    /// Per-coordinate variance `ν²` of the embedding perturbation: `γ²` for
    /// Gaussian, `γ²/(3d)` for uniform on `[−γ/√d, γ/√d]`.
    pub fn embedding_variance(&self, dim: usize) -> f64 {
        let g2 = self.magnitude * self.magnitude;
        match self.perturbation {
            Perturbation::Gaussian => g2,
            Perturbation::Uniform => g2 / (3.0 * dim as f64),
        }
    }
}

/// `ε_θ(x_t, y=k) = W x_t + b` at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDenoiser {
    pub schedule: Schedule,
    pub weight: Matrix<f64>,
    pub bias: Vec<f64>,
}

impl LinearDenoiser {
    pub fn t(&self) -> f64 {
        self.schedule.t
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.weight.matvec(x);
        out.iter_mut().zip(&self.bias).for_each(|(o, b)| *o += b);
        out
    }

    /// Max-abs difference over all of `W` and `b`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let bias = self.bias.iter().zip(&other.bias).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        self.weight.max_abs_diff(&other.weight).max(bias)
    }
}

/// `(α, S, μ̂)`: the score `−(σ²I + r²S)⁻¹x + α r (σ²I + r²S)⁻¹μ̂` and the
/// limiting generation law `N(αμ̂, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveScoreSpec {
    alpha: f64,
    cov: SymMatrix<f64>,
    spectrum: Spectrum<f64>,
    mean: Vec<f64>,
}

impl EffectiveScoreSpec {
    /// Arbitrary `(α, S, μ̂)`; `S` is decomposed here.
    pub fn new(alpha: f64, cov: SymMatrix<f64>, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), got: mean.len() });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("mean scale {alpha} outside (0, 1]")));
        }
        let spectrum = eigendecompose(&cov)?;
        Ok(Self { alpha, cov, spectrum, mean })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cov(&self) -> &SymMatrix<f64> {
        &self.cov
    }

    pub fn spectrum(&self) -> &Spectrum<f64> {
        &self.spectrum
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Score of the linear family at time `t`, evaluated through the spectrum of `S`.
    pub fn score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if t < T_MIN {
            return Err(Error::ScheduleSingular(t));
        }
        let s = schedule_at(t)?;
        let inv = self.spectrum.map_eigenvalues(|l| 1.0 / (s.sigma * s.sigma + s.r * s.r * l))?;
        let px = self.spectrum.project(x);
        let pm = self.spectrum.project(&self.mean);
        let y: Vec<f64> = (0..self.dim())
            .map(|i| inv[i] * (self.alpha * s.r * pm[i] - px[i]))
            .collect();
        Ok(self.spectrum.unproject(&y))
    }
}

fn build_effective(stats: &ClassStats, spec: &CorruptionSpec) -> Result<EffectiveScoreSpec> {
    if spec.magnitude == 0.0 {
        return Ok(EffectiveScoreSpec {
            alpha: 1.0,
            cov: stats.cov().clone(),
            spectrum: stats.spectrum().clone(),
            mean: stats.mean().to_vec(),
        });
    }
    let nu2 = spec.embedding_variance(stats.dim());
    let alpha = 1.0 / (1.0 + nu2);
    let inflation = nu2 / (1.0 + nu2);
    let (cov, spectrum) = match spec.form {
        CorruptionForm::Isotropic => {
            // Shares Σ's eigenbasis, so no new decomposition is needed.
            let shift = inflation * stats.mean_norm_sq();
            (stats.cov().add_diagonal(shift), stats.spectrum().shifted(shift))
        }
        CorruptionForm::RankOne => {
            let cov = stats.cov().add_outer(inflation, stats.mean());
            let spectrum = eigendecompose(&cov)?;
            (cov, spectrum)
        }
    };
    Ok(EffectiveScoreSpec { alpha, cov, spectrum, mean: stats.mean().to_vec() })
}

/// Packages `(α, S)` for `stats` under `spec`, requiring `λ_min(S) ≥ FULL_RANK_TOL`.
pub fn effective_spec(stats: &ClassStats, spec: &CorruptionSpec) -> Result<EffectiveScoreSpec> {
    effective_spec_with_tol(stats, spec, FULL_RANK_TOL)
}

pub fn effective_spec_with_tol(stats: &ClassStats, spec: &CorruptionSpec, tol: f64) -> Result<EffectiveScoreSpec> {
    let eff = build_effective(stats, spec)?;
    let min = eff.spectrum.min_eigenvalue();
    if min < tol {
        return Err(Error::RankDeficient { min_eigenvalue: min, tol });
    }
    Ok(eff)
}

fn denoiser_from_effective(eff: &EffectiveScoreSpec, t: f64) -> Result<LinearDenoiser> {
    let s = schedule_at(t)?;
    let (sigma, r) = (s.sigma, s.r);
    let w = eff.spectrum.apply_spectral(|l| sigma / (sigma * sigma + r * r * l))?;
    let scale = -eff.alpha * r;
    let bias = w.matvec(&eff.mean).into_iter().map(|v| scale * v).collect();
    Ok(LinearDenoiser { schedule: s, weight: w.into(), bias })
}

/// `W = σ(σ²I + r²Σ)⁻¹`, `b = −rσ(σ²I + r²Σ)⁻¹μ̂`.
pub fn clean_denoiser(stats: &ClassStats, t: f64) -> Result<LinearDenoiser> {
    corrupted_denoiser(stats, &CorruptionSpec::clean(), t)
}

/// Optimal denoiser under embedding corruption; `γ = 0` is exactly
/// [`clean_denoiser`].
pub fn corrupted_denoiser(stats: &ClassStats, spec: &CorruptionSpec, t: f64) -> Result<LinearDenoiser> {
    schedule_at(t)?;
    denoiser_from_effective(&build_effective(stats, spec)?, t)
}

/// `−(W x + b)/σ_t`.
pub fn score_from_denoiser(den: &LinearDenoiser, x: &[f64]) -> Result<Vec<f64>> {
    if den.t() < T_MIN {
        return Err(Error::ScheduleSingular(den.t()));
    }
    let sigma = den.schedule.sigma;
    Ok(den.apply(x).into_iter().map(|v| -v / sigma).collect())
}

/// True conditional score of `N(μ, I)` under the OU forward process: `−x + r_t μ`.
pub fn ground_truth_score(mu: &[f64], t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let s = schedule_at(t)?;
    Ok(x.iter().zip(mu).map(|(&xi, &m)| -xi + s.r * m).collect())
}
