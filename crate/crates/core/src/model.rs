//! Ground-truth Gaussian mixture, labelled datasets, per-class empirical
//! statistics and the Ornstein–Uhlenbeck noising schedule.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, standard_normal};
use crate::spectral::{eigendecompose, Spectrum, SymMatrix};

/// Eigenvalues of an empirical covariance down to `-PSD_TOL` are treated as
/// rounding noise and clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Mixture of unit-covariance Gaussians `Σ_y w_y N(μ_y, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureModel {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl TryFrom<RawMixture> for MixtureModel {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureModel::new(raw.dim, raw.weights, raw.means)
    }
}

impl From<MixtureModel> for RawMixture {
    fn from(m: MixtureModel) -> Self {
        RawMixture { dim: m.dim, weights: m.weights, means: m.means }
    }
}

impl MixtureModel {
    pub fn new(dim: usize, weights: Vec<f64>, means: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidModel("at least one class required".into()));
        }
        if weights.len() != means.len() {
            return Err(Error::InvalidModel(format!(
                "{} weights but {} means",
                weights.len(),
                means.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidModel(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        for (k, m) in means.iter().enumerate() {
            if m.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "mean {k} has length {}, expected {dim}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("mean {k} is not finite")));
            }
        }
        Ok(Self { dim, weights, means })
    }

    /// Single class `N(mean, I)`.
    pub fn single(mean: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        Self::new(dim, vec![1.0], vec![mean])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class]
    }
}

/// Points with 0-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    classes: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(dim: usize, classes: usize, points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: labels.len() });
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!("label {l} outside {classes} classes")));
        }
        Ok(Self { dim, classes, points, labels })
    }

    /// All points belonging to one class, unlabelled.
    pub fn single_class(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let labels = vec![0; points.len()];
        Self::new(dim, 1, points, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Points of `class`, in dataset order.
    pub fn class_points(&self, class: usize) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

/// Labels i.i.d. from the class weights, then `x_i ~ N(μ_{y_i}, I)`.
pub fn sample_mixture<R: Rng + ?Sized>(model: &MixtureModel, n: usize, rng: &mut R) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let categorical = WeightedIndex::new(model.weights()).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = if model.classes() == 1 { 0 } else { categorical.sample(rng) };
        let point = model.mean(y).iter().map(|&m| m + standard_normal(rng)).collect();
        points.push(point);
        labels.push(y);
    }
    LabeledDataset::new(model.dim(), model.classes(), points, labels)
}

/// `n` draws of `N(mean, I)`.
pub fn sample_component<R: Rng + ?Sized>(mean: &[f64], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut x = vec![0.0; mean.len()];
            fill_standard_normal(rng, &mut x);
            x.iter_mut().zip(mean).for_each(|(v, m)| *v += m);
            x
        })
        .collect()
}

/// Empirical mean and (biased, `1/n`) covariance of one class, with the
/// covariance spectrum cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    class: usize,
    count: usize,
    mean: Vec<f64>,
    cov: SymMatrix<f64>,
    spectrum: Spectrum<f64>,
    mean_norm_sq: f64,
}

impl ClassStats {
    /// Builds stats from given moments, e.g. synthetic `Σ = I`. Eigenvalues
    /// in `[-PSD_TOL, 0)` are clamped; lower ones are rejected.
    pub fn from_moments(class: usize, count: usize, mean: Vec<f64>, cov: SymMatrix<f64>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), got: mean.len() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mean is not finite".into()));
        }
        let spectrum = eigendecompose(&cov)?.clamp_psd(PSD_TOL)?;
        let mean_norm_sq = mean.iter().map(|v| v * v).sum();
        Ok(Self { class, count, mean, cov, spectrum, mean_norm_sq })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix<f64> {
        &self.cov
    }

    pub fn spectrum(&self) -> &Spectrum<f64> {
        &self.spectrum
    }

    /// `‖μ̂‖²`
    pub fn mean_norm_sq(&self) -> f64 {
        self.mean_norm_sq
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min_eigenvalue()
    }
}

/// `μ̂ = (1/n)Σx_i`, `Σ = (1/n)Σx_i x_iᵀ − (1/n²)(Σx_i)(Σx_i)ᵀ`.
pub fn class_stats(data: &LabeledDataset, class: usize) -> Result<ClassStats> {
    let d = data.dim();
    let mut n = 0usize;
    let mut sum = vec![0.0; d];
    let mut sum_outer = vec![0.0; d * d];
    for (x, _) in data.points().iter().zip(data.labels()).filter(|(_, &l)| l == class) {
        n += 1;
        for i in 0..d {
            sum[i] += x[i];
            for j in i..d {
                sum_outer[i * d + j] += x[i] * x[j];
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyClass(class));
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = sum_outer[i * d + j] / nf - sum[i] * sum[j] / (nf * nf);
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    ClassStats::from_moments(class, n, mean, SymMatrix::new(d, cov)?)
}

/// Statistics of an unlabelled point set treated as one class.
pub fn point_stats(points: &[Vec<f64>]) -> Result<ClassStats> {
    if points.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    class_stats(&LabeledDataset::single_class(points.to_vec())?, 0)
}

/// Passes the stats through if `λ_min(Σ) ≥ tol`.
pub fn require_full_rank(stats: ClassStats, tol: f64) -> Result<ClassStats> {
    let min = stats.min_eigenvalue();
    if min < tol {
        return Err(Error::RankDeficient { min_eigenvalue: min, tol });
    }
    Ok(stats)
}

/// OU marginal coefficients: `x_t | x ~ N(r_t x, σ_t² I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t: f64,
    pub r: f64,
    pub sigma: f64,
}

pub fn schedule_at(t: f64) -> Result<Schedule> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    Ok(Schedule { t, r: (-t).exp(), sigma: (-(-2.0 * t).exp_m1()).sqrt() })
}

/// `x_t = r_t x + σ_t ε` with `ε ~ N(0, I)`.
pub fn forward_sample<R: Rng + ?Sized>(x: &[f64], t: f64, rng: &mut R) -> Result<Vec<f64>> {
    let s = schedule_at(t)?;
    let mut eps = vec![0.0; x.len()];
    fill_standard_normal(rng, &mut eps);
    if s.sigma == 0.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter().zip(&eps).map(|(&xi, &e)| s.r * xi + s.sigma * e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn model_validation() {
        assert!(MixtureModel::new(2, vec![1.0, 0.0], vec![vec![0.0; 2]; 2]).is_err());
        assert!(MixtureModel::new(2, vec![0.5, 0.6], vec![vec![0.0; 2]; 2]).is_err());
        assert!(MixtureModel::new(2, vec![1.0], vec![vec![0.0; 3]]).is_err());
        assert!(MixtureModel::new(1, vec![1.0], vec![vec![f64::INFINITY]]).is_err());
        assert!(MixtureModel::new(2, vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).is_ok());
    }

    #[test]
    fn single_point_stats() {
        let s = point_stats(&[vec![1.5, -2.0]]).unwrap();
        assert_eq!(s.mean(), &[1.5, -2.0]);
        assert_eq!(s.cov().max_abs(), 0.0);
        assert_eq!(s.mean_norm_sq(), 1.5 * 1.5 + 4.0);
    }

    #[test]
    fn two_point_stats_by_hand() {
        let s = point_stats(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.mean(), &[0.5, 0.5]);
        let expect = SymMatrix::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(s.cov().max_abs_diff(&expect) < 1e-15);
        // Rank one: eigenvalues 0.5 and 0.
        assert!(matches!(
            require_full_rank(s.clone(), 1e-8),
            Err(Error::RankDeficient { min_eigenvalue, .. }) if min_eigenvalue.abs() < 1e-15
        ));
        assert!(require_full_rank(s, 0.0).is_ok());
    }

    #[test]
    fn empty_class_is_error() {
        let data = LabeledDataset::new(1, 2, vec![vec![0.0]], vec![0]).unwrap();
        assert_eq!(class_stats(&data, 1), Err(Error::EmptyClass(1)));
    }

    #[test]
    fn identity_is_full_rank() {
        let s = ClassStats::from_moments(0, 10, vec![0.0; 3], SymMatrix::identity(3)).unwrap();
        assert!(require_full_rank(s, 1e-8).is_ok());
    }

    #[test]
    fn schedule_values() {
        let s0 = schedule_at(0.0).unwrap();
        assert_eq!((s0.r, s0.sigma), (1.0, 0.0));
        let s = schedule_at(std::f64::consts::LN_2).unwrap();
        assert!((s.r - 0.5).abs() < 1e-15);
        assert!((s.sigma - 0.75f64.sqrt()).abs() < 1e-15);
        let far = schedule_at(40.0).unwrap();
        assert!(far.r < 1e-17);
        assert!((far.sigma - 1.0).abs() < 1e-12);
        assert!(matches!(schedule_at(-1.0), Err(Error::InvalidTime(_))));
        assert!(matches!(schedule_at(f64::NAN), Err(Error::InvalidTime(_))));
        assert!(matches!(schedule_at(f64::INFINITY), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn forward_at_zero_is_identity() {
        let x = vec![0.1, -3.0, 7.25];
        assert_eq!(forward_sample(&x, 0.0, &mut stream(1)).unwrap(), x);
    }

    #[test]
    fn mixture_sampling_is_deterministic() {
        let m = MixtureModel::new(2, vec![0.3, 0.7], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = sample_mixture(&m, 50, &mut stream(11)).unwrap();
        let b = sample_mixture(&m, 50, &mut stream(11)).unwrap();
        assert_eq!(a, b);
        assert!(sample_mixture(&m, 0, &mut stream(11)).is_err());
    }
}
