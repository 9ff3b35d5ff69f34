//! Diversity (differential entropy) and quality (squared 2-Wasserstein
//! distance to the true component) of clean vs corrupted generation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{limit_moments, GaussianMoments};
use crate::error::{Error, Result};
use crate::model::{point_stats, require_full_rank, sample_component, ClassStats, PSD_TOL};
use crate::rng::{child, fill_standard_normal};
use crate::score::{effective_spec, CorruptionForm, CorruptionSpec, FULL_RANK_TOL};
use crate::spectral::{eigendecompose, SymMatrix};

/// Fraction of rejected (rank-deficient) datasets tolerated by
/// [`expected_w2_gap_mc`].
pub const MAX_REJECTION_RATE: f64 = 0.1;
const MAX_ATTEMPTS_PER_TRIAL: usize = 20;
const VARIANCE_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gamma: f64,
    pub dim: usize,
    pub n_k: usize,
    pub form: CorruptionForm,
    /// Mean entropy gap `H(corrupted) − H(clean)` over trials, nats.
    pub entropy_gap: f64,
    /// Mean `d²`.
    pub w2_clean: f64,
    /// Mean `d_c²`.
    pub w2_corrupted: f64,
    /// Mean `d² − d_c²`.
    pub w2_gap: f64,
    pub trials: usize,
    /// Standard error of `w2_gap`.
    pub standard_error: f64,
    /// Datasets discarded as rank deficient and redrawn.
    pub rejected: usize,
}

/// `(d/2)·log(2πe) + ½·log|Σ|`.
pub fn gaussian_entropy(m: &GaussianMoments) -> Result<f64> {
    let log_det = eigendecompose(&m.cov)?.log_det()?;
    let d = m.dim() as f64;
    Ok(0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 0.5 * log_det)
}

/// `½ Σ_i log(1 + γ²‖μ̂‖² / ((1+γ²) λ_i))` over the eigenvalues of `Σ_k`.
pub fn entropy_gap_analytic(stats: &ClassStats, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be >= 0")));
    }
    let min = stats.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::RankDeficient { min_eigenvalue: min, tol: 0.0 });
    }
    let g2 = gamma * gamma;
    let c = g2 / (1.0 + g2) * stats.mean_norm_sq();
    Ok(0.5 * stats.spectrum().eigenvalues().iter().map(|&l| (c / l).ln_1p()).sum::<f64>())
}

/// Squared 2-Wasserstein distance between Gaussians:
/// `‖Δμ‖² + Tr(A + B − 2(A^{½} B A^{½})^{½})`.
pub fn w2_gaussians(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let root_a = eigendecompose(&a.cov)?.clamp_psd(PSD_TOL)?.apply_spectral(f64::sqrt)?;
    let middle = sandwich(&root_a, &b.cov)?;
    let cross: f64 = eigendecompose(&middle)?
        .clamp_psd(PSD_TOL)?
        .eigenvalues()
        .iter()
        .map(|l| l.sqrt())
        .sum();
    let value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// `R·B·R` for symmetric `R`.
fn sandwich(r: &SymMatrix<f64>, b: &SymMatrix<f64>) -> Result<SymMatrix<f64>> {
    let r = r.to_matrix();
    let prod = r.matmul(&b.to_matrix()).matmul(&r);
    Ok(prod.symmetrize())
}

/// `½(log|S| − log|Σ|)` for the effective covariance `S` of `spec`.
pub fn entropy_gap(stats: &ClassStats, spec: &CorruptionSpec) -> Result<f64> {
    let clean = effective_spec(stats, &CorruptionSpec::clean())?;
    let corrupted = effective_spec(stats, spec)?;
    Ok(0.5 * (corrupted.spectrum().log_det()? - clean.spectrum().log_det()?))
}

/// `(d², d_c²)`: squared W2 from `N(μ, I)` to the clean and the corrupted
/// limiting generation laws.
pub fn quality_pair(stats: &ClassStats, mu_true: &[f64], gamma: f64, form: CorruptionForm) -> Result<(f64, f64)> {
    if mu_true.len() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), got: mu_true.len() });
    }
    let truth = GaussianMoments::new(mu_true.to_vec(), SymMatrix::identity(stats.dim()))?;
    let clean = limit_moments(&effective_spec(stats, &CorruptionSpec::clean())?)?;
    let corrupted = limit_moments(&effective_spec(stats, &CorruptionSpec::gaussian(gamma, form)?)?)?;
    Ok((w2_gaussians(&truth, &clean)?, w2_gaussians(&truth, &corrupted)?))
}

/// Kahan-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mean and standard error of the mean.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = Kahan::default();
    values.iter().for_each(|&v| s.add(v));
    let mean = s.sum / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = Kahan::default();
    values.iter().for_each(|&v| ss.add((v - mean) * (v - mean)));
    (mean, (ss.sum / (n - 1.0) / n).sqrt())
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = Kahan::default();
    let mut n = 0usize;
    values.for_each(|v| {
        s.add(v);
        n += 1;
    });
    s.sum / n as f64
}

struct TrialOutcome {
    w2_clean: f64,
    w2_corrupted: f64,
    entropy_gap: f64,
    rejected: usize,
}

/// Monte Carlo estimate of `E[d² − d_c²]` over training sets of `n_k`
/// draws from `N(μ, I)`. Trial `i` draws from `child(seed, i)`; datasets that
/// fail the full-rank gate are redrawn from the same stream and counted.
pub fn expected_w2_gap_mc(
    mu: &[f64],
    n_k: usize,
    gamma: f64,
    form: CorruptionForm,
    trials: usize,
    seed: u64,
) -> Result<GapReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let spec = CorruptionSpec::gaussian(gamma, form)?;
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = child(seed, i as u64);
            let mut rejected = 0;
            loop {
                let points = sample_component(mu, n_k, &mut rng);
                let stats = match require_full_rank(point_stats(&points)?, FULL_RANK_TOL) {
                    Ok(s) => s,
                    Err(Error::RankDeficient { .. }) => {
                        rejected += 1;
                        if rejected >= MAX_ATTEMPTS_PER_TRIAL {
                            return Err(Error::DegenerateRegime { rejected, attempted: rejected });
                        }
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let (w2_clean, w2_corrupted) = quality_pair(&stats, mu, gamma, form)?;
                let entropy_gap = match form {
                    CorruptionForm::Isotropic => entropy_gap_analytic(&stats, gamma)?,
                    CorruptionForm::RankOne => entropy_gap(&stats, &spec)?,
                };
                return Ok(TrialOutcome { w2_clean, w2_corrupted, entropy_gap, rejected });
            }
        })
        .collect();

    let mut done = Vec::with_capacity(trials);
    for o in outcomes {
        done.push(o?);
    }
    let rejected: usize = done.iter().map(|o| o.rejected).sum();
    if rejected as f64 > MAX_REJECTION_RATE * trials as f64 {
        return Err(Error::DegenerateRegime { rejected, attempted: trials + rejected });
    }
    let gaps: Vec<f64> = done.iter().map(|o| o.w2_clean - o.w2_corrupted).collect();
    let (w2_gap, standard_error) = mean_and_se(&gaps);
    Ok(GapReport {
        gamma,
        dim: mu.len(),
        n_k,
        form,
        entropy_gap: mean_of(done.iter().map(|o| o.entropy_gap)),
        w2_clean: mean_of(done.iter().map(|o| o.w2_clean)),
        w2_corrupted: mean_of(done.iter().map(|o| o.w2_corrupted)),
        w2_gap,
        trials,
        standard_error,
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `E[Var(x_i | x_1 + … + x_n = z)]` per coordinate
/// for `x_i ~ N(0, I_d)`; the expected value is `(n−1)/n`.
///
/// Given the sum, `x_i − z/n` is independent of `z` with the conditional
/// variance, so each trial averages `(x_ic − x̄_c)²` over `i` and `c`.
pub fn conditional_variance_check(n: usize, d: usize, trials: usize, seed: u64) -> Result<VarianceEstimate> {
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if d == 0 || trials == 0 {
        return Err(Error::InvalidArgument("dimension and trials must be positive".into()));
    }
    let blocks = trials.div_ceil(VARIANCE_BLOCK);
    let per_trial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|blk| {
            let mut rng = child(seed, blk as u64);
            let count = VARIANCE_BLOCK.min(trials - blk * VARIANCE_BLOCK);
            let mut x = vec![0.0; n * d];
            (0..count)
                .map(|_| {
                    fill_standard_normal(&mut rng, &mut x);
                    let mut total = 0.0;
                    for c in 0..d {
                        let mean = (0..n).map(|i| x[i * d + c]).sum::<f64>() / n as f64;
                        total += (0..n).map(|i| (x[i * d + c] - mean).powi(2)).sum::<f64>();
                    }
                    total / (n * d) as f64
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (estimate, standard_error) = mean_and_se(&per_trial);
    Ok(VarianceEstimate { estimate, standard_error, trials })
}
