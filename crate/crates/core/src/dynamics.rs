//! Reverse-ODE generation `dz = (z + score_{T−t}(z)) dt`, `z_0 ~ N(0, I)`,
//! with explicit Euler steps, plus the closed-form moments of its output.
//!
//! Integration runs in the eigenbasis of the effective covariance `S`, where
//! the linear score decouples into `d` scalar equations
//!
//! ```text
//! dy_i = (1 − 1/(1 + r²(λ_i − 1))) y_i dt + α r m_i / (1 + r²(λ_i − 1)) dt
//! ```
//!
//! with `m = Uᵀμ̂` and `r = e^{−(T−t)}`. The denominator is `σ² + r²λ_i`
//! rewritten through `σ² = 1 − r²`, which makes the drift exactly zero when
//! `λ_i = 1` and `m_i = 0`.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{child, fill_standard_normal};
use crate::score::{EffectiveScoreSpec, T_MIN};
use crate::spectral::SymMatrix;

/// Largest step accepted by [`IntegrationPlan::new`].
pub const MAX_DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 8.0;
pub const DEFAULT_STEPS: usize = 4000;

/// Rows per independently seeded shard of initial noise.
pub const SHARD_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationPlan {
    horizon: f64,
    steps: usize,
}

impl IntegrationPlan {
    /// Requires `T/N ≤ MAX_DEFAULT_STEP`.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        let plan = Self::coarse(horizon, steps)?;
        if plan.step() > MAX_DEFAULT_STEP {
            return Err(Error::InvalidArgument(format!(
                "step {} exceeds {MAX_DEFAULT_STEP}; use IntegrationPlan::coarse to override",
                plan.step()
            )));
        }
        Ok(plan)
    }

    /// Any positive horizon and step count.
    pub fn coarse(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTime(horizon));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Forward-process time at which step `j` evaluates the score.
    pub fn score_time(&self, j: usize) -> f64 {
        (self.horizon - j as f64 * self.step()).max(T_MIN)
    }
}

impl Default for IntegrationPlan {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, steps: DEFAULT_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub cov: SymMatrix<f64>,
}

impl GaussianMoments {
    pub fn new(mean: Vec<f64>, cov: SymMatrix<f64>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), got: mean.len() });
        }
        Ok(Self { mean, cov })
    }

    /// `N(0, I)` in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], cov: SymMatrix::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Row-major `n × d` block of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// One line per sample, `d` comma-separated columns in 17 significant
    /// digits. `header` lines are written first, verbatim.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(out, "{line}")?;
        }
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&crate::csvfmt::format_real(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// `n` draws of `N(0, I_d)`, generated in shards of [`SHARD_ROWS`] rows with
/// shard `s` drawn from `child(seed, s)`.
pub fn initial_noise(dim: usize, n: usize, seed: u64) -> SampleMatrix {
    let mut data = vec![0.0; n * dim];
    data.par_chunks_mut(SHARD_ROWS * dim.max(1))
        .enumerate()
        .for_each(|(shard, block)| fill_standard_normal(&mut child(seed, shard as u64), block));
    SampleMatrix { dim, data }
}

struct StepTable {
    dim: usize,
    /// Per step and direction: linear drift coefficient.
    gain: Vec<f64>,
    /// Per step and direction: constant drift term.
    offset: Vec<f64>,
}

fn step_table(spec: &EffectiveScoreSpec, plan: &IntegrationPlan) -> StepTable {
    let d = spec.dim();
    let lambdas = spec.spectrum().eigenvalues();
    let m = spec.spectrum().project(spec.mean());
    let mut gain = Vec::with_capacity(plan.steps() * d);
    let mut offset = Vec::with_capacity(plan.steps() * d);
    for j in 0..plan.steps() {
        let r = (-plan.score_time(j)).exp();
        let r2 = r * r;
        for i in 0..d {
            let den = 1.0 + r2 * (lambdas[i] - 1.0);
            gain.push(1.0 - 1.0 / den);
            offset.push(spec.alpha() * r * m[i] / den);
        }
    }
    StepTable { dim: d, gain, offset }
}

/// Euler integration of [`initial_noise`] draws.
pub fn integrate_reverse(
    spec: &EffectiveScoreSpec,
    plan: &IntegrationPlan,
    n_samples: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    let z0 = initial_noise(spec.dim(), n_samples, seed);
    integrate_from(spec, plan, &z0)
}

/// Euler integration starting from the given rows of `z_0`.
pub fn integrate_from(spec: &EffectiveScoreSpec, plan: &IntegrationPlan, initial: &SampleMatrix) -> Result<SampleMatrix> {
    let d = spec.dim();
    if initial.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: initial.dim() });
    }
    let table = step_table(spec, plan);
    let h = plan.step();
    let spectrum = spec.spectrum();

    let rows: Vec<Result<Vec<f64>>> = initial
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|z0| {
            let mut y = spectrum.project(z0);
            for j in 0..plan.steps() {
                let gain = &table.gain[j * table.dim..(j + 1) * table.dim];
                let offset = &table.offset[j * table.dim..(j + 1) * table.dim];
                for i in 0..d {
                    y[i] += h * (gain[i] * y[i] + offset[i]);
                }
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::NumericalBlowup { step: j });
                }
            }
            Ok(spectrum.unproject(&y))
        })
        .collect();

    let mut data = Vec::with_capacity(initial.as_slice().len());
    for row in rows {
        data.extend(row?);
    }
    SampleMatrix::new(d, data)
}

fn positive_eigenvalues(spec: &EffectiveScoreSpec) -> Result<&[f64]> {
    let lambdas = spec.spectrum().eigenvalues();
    if let Some(&l) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite { eigenvalue: l });
    }
    Ok(lambdas)
}

fn rotate_moments(spec: &EffectiveScoreSpec, mean_gain: &[f64], variances: &[f64]) -> Result<GaussianMoments> {
    let spectrum = spec.spectrum();
    let m = spectrum.project(spec.mean());
    let scaled: Vec<f64> = m.iter().zip(mean_gain).map(|(a, b)| a * b).collect();
    let mean = spectrum.unproject(&scaled);
    let cov = spectrum.compose(variances)?;
    Ok(GaussianMoments { mean, cov })
}

/// Continuous-time moments after horizon `T`:
/// `e_i = α(1 − √λ_i e^{−T} / √(1 + (λ_i − 1)e^{−2T}))`,
/// `v_i = λ_i / (1 + (λ_i − 1)e^{−2T})`.
pub fn finite_t_moments(spec: &EffectiveScoreSpec, horizon: f64) -> Result<GaussianMoments> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidTime(horizon));
    }
    let lambdas = positive_eigenvalues(spec)?;
    let q = (-horizon).exp();
    let q2 = q * q;
    let mut e = Vec::with_capacity(lambdas.len());
    let mut v = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let den = 1.0 + (l - 1.0) * q2;
        e.push(spec.alpha() * (1.0 - l.sqrt() * q / den.sqrt()));
        v.push(l / den);
    }
    rotate_moments(spec, &e, &v)
}

/// Exact moments of the Euler scheme itself (telescoped recursion), for
/// separating step-size bias from Monte Carlo error.
pub fn discrete_moments(spec: &EffectiveScoreSpec, plan: &IntegrationPlan) -> Result<GaussianMoments> {
    let d = spec.dim();
    let table = step_table(spec, plan);
    let h = plan.step();
    let m = spec.spectrum().project(spec.mean());
    let mut mean = vec![0.0; d];
    let mut var = vec![1.0; d];
    for j in 0..plan.steps() {
        for i in 0..d {
            let a = 1.0 + h * table.gain[j * d + i];
            mean[i] = a * mean[i] + h * table.offset[j * d + i];
            var[i] *= a * a;
        }
    }
    // Express the mean as a per-direction gain on m for rotate_moments.
    let gain: Vec<f64> = (0..d).map(|i| if m[i] != 0.0 { mean[i] / m[i] } else { 0.0 }).collect();
    rotate_moments(spec, &gain, &var)
}

/// `T → ∞` limit: `N(αμ̂, S)`.
pub fn limit_moments(spec: &EffectiveScoreSpec) -> Result<GaussianMoments> {
    positive_eigenvalues(spec)?;
    let mean = spec.mean().iter().map(|m| spec.alpha() * m).collect();
    Ok(GaussianMoments { mean, cov: spec.cov().clone() })
}

/// Sample mean and biased (`1/n`) sample covariance.
pub fn empirical_moments(samples: &SampleMatrix) -> Result<GaussianMoments> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let d = samples.dim();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for row in samples.rows() {
        for i in 0..d {
            mean[i] += row[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut cov = vec![0.0; d * d];
    for row in samples.rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / nf;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok(GaussianMoments { mean, cov: SymMatrix::new(d, cov)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, diag: &[f64], mean: &[f64]) -> EffectiveScoreSpec {
        EffectiveScoreSpec::new(alpha, SymMatrix::diagonal(diag), mean.to_vec()).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(IntegrationPlan::new(8.0, 4000).is_ok());
        assert!(IntegrationPlan::new(8.0, 100).is_err());
        assert!(IntegrationPlan::coarse(8.0, 100).is_ok());
        assert!(IntegrationPlan::coarse(0.0, 100).is_err());
        assert!(IntegrationPlan::coarse(1.0, 0).is_err());
        let p = IntegrationPlan::default();
        assert_eq!(p.score_time(0), 8.0);
        assert!((p.score_time(p.steps() - 1) - p.step()).abs() < 1e-12);
    }

    #[test]
    fn stationary_spec_returns_initial_noise_exactly() {
        let s = spec(1.0, &[1.0, 1.0, 1.0], &[0.0; 3]);
        let plan = IntegrationPlan::new(2.0, 400).unwrap();
        let z0 = initial_noise(3, 50, 9);
        assert_eq!(integrate_from(&s, &plan, &z0).unwrap(), z0);
        assert_eq!(integrate_reverse(&s, &plan, 50, 9).unwrap(), z0);
    }

    #[test]
    fn unit_eigenvalue_coefficients() {
        let s = spec(0.7, &[1.0], &[2.0]);
        for &t in &[0.5, 3.0, 8.0] {
            let m = finite_t_moments(&s, t).unwrap();
            assert!((m.mean[0] - 0.7 * (1.0 - (-t).exp()) * 2.0).abs() < 1e-14);
            assert!((m.cov.get(0, 0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_variances_at_three() {
        let s = spec(1.0, &[2.0, 0.5], &[0.0, 0.0]);
        let m = finite_t_moments(&s, 3.0).unwrap();
        let q = (-6.0f64).exp();
        assert!((m.cov.get(0, 0) - 2.0 / (1.0 + q)).abs() < 1e-14);
        assert!((m.cov.get(1, 1) - 0.5 / (1.0 - 0.5 * q)).abs() < 1e-14);
        assert_eq!(m.cov.get(0, 1), 0.0);
    }

    #[test]
    fn limit_is_scaled_mean_and_s() {
        let s = spec(0.5, &[1.5, 1.2], &[1.0, 0.0]);
        let lim = limit_moments(&s).unwrap();
        assert_eq!(lim.mean, vec![0.5, 0.0]);
        assert_eq!(&lim.cov, s.cov());
        let far = finite_t_moments(&s, 30.0).unwrap();
        assert!(far.cov.max_abs_diff(&lim.cov) < 1e-12);
        assert!((far.mean[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_positive_spectrum_rejected() {
        let s = spec(1.0, &[1.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(finite_t_moments(&s, 1.0), Err(Error::NotPositiveDefinite { .. })));
        assert!(matches!(limit_moments(&s), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn empirical_moment_edge_cases() {
        let one = SampleMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(empirical_moments(&one), Err(Error::InsufficientSamples { .. })));
        let constant = SampleMatrix::from_rows(&vec![vec![3.0, -1.0]; 5]).unwrap();
        let m = empirical_moments(&constant).unwrap();
        assert_eq!(m.mean, vec![3.0, -1.0]);
        assert_eq!(m.cov.max_abs(), 0.0);
    }

    #[test]
    fn discrete_moments_converge_to_continuous() {
        let s = spec(0.8, &[1.7, 0.6], &[0.9, -0.4]);
        let exact = finite_t_moments(&s, 5.0).unwrap();
        let fine = discrete_moments(&s, &IntegrationPlan::new(5.0, 20_000).unwrap()).unwrap();
        let coarse = discrete_moments(&s, &IntegrationPlan::new(5.0, 2_000).unwrap()).unwrap();
        let err = |m: &GaussianMoments| {
            m.cov.max_abs_diff(&exact.cov).max(
                m.mean.iter().zip(&exact.mean).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())),
            )
        };
        assert!(err(&fine) < 3e-4);
        // First order: ten times the step, roughly ten times the error.
        let ratio = err(&coarse) / err(&fine);
        assert!(ratio > 7.0 && ratio < 13.0, "ratio {ratio}");
    }

    #[test]
    fn csv_rows_have_seventeen_digits() {
        let m = SampleMatrix::from_rows(&[vec![0.1, -2.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, &["z1,z2".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "z1,z2\n1.0000000000000001e-1,-2.0000000000000000e0\n");
    }
}
