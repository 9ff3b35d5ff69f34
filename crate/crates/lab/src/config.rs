//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use condcorrupt::model::MixtureModel;
use condcorrupt::score::{CorruptionForm, CorruptionSpec, Perturbation};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// When set, the swept component is `model.mean(class)` and every entry of
    /// `dims` must equal `model.dim()`. Otherwise the component mean is
    /// `√mean_norm_sq · e₁` in each swept dimension.
    #[serde(default)]
    pub model: Option<MixtureModel>,
    #[serde(default)]
    pub class: usize,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_n_per_class")]
    pub n_per_class: Vec<usize>,
    #[serde(default = "default_mean_norm_sq")]
    pub mean_norm_sq: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_moment_samples")]
    pub moment_samples: usize,
    #[serde(default = "default_gap_trials")]
    pub gap_trials: usize,
    #[serde(default = "default_form")]
    pub form: CorruptionForm,
    #[serde(default = "default_perturbation")]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Records wall-clock time per row. Off by default so that output files
    /// are byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_gamma_grid() -> Vec<f64> {
    let base = 0.5 / 200f64.sqrt();
    vec![0.0, base, 2.0 * base]
}
fn default_dims() -> Vec<usize> {
    vec![8]
}
fn default_n_per_class() -> Vec<usize> {
    vec![200]
}
fn default_mean_norm_sq() -> f64 {
    1.0
}
fn default_horizon() -> f64 {
    condcorrupt::dynamics::DEFAULT_HORIZON
}
fn default_steps() -> usize {
    condcorrupt::dynamics::DEFAULT_STEPS
}
fn default_moment_samples() -> usize {
    50_000
}
fn default_gap_trials() -> usize {
    2000
}
fn default_form() -> CorruptionForm {
    CorruptionForm::Isotropic
}
fn default_perturbation() -> Perturbation {
    Perturbation::Gaussian
}

impl ExperimentConfig {
    /// Defaults for everything except the seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            model: None,
            class: 0,
            gamma_grid: default_gamma_grid(),
            dims: default_dims(),
            n_per_class: default_n_per_class(),
            mean_norm_sq: default_mean_norm_sq(),
            horizon: default_horizon(),
            steps: default_steps(),
            moment_samples: default_moment_samples(),
            gap_trials: default_gap_trials(),
            form: default_form(),
            perturbation: default_perturbation(),
            output: None,
            threads: None,
            record_timing: false,
        }
    }

    pub fn from_json(text: &str) -> LabResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if self.gamma_grid.is_empty() || self.dims.is_empty() || self.n_per_class.is_empty() {
            return bad("gamma_grid, dims and n_per_class must be nonempty".into());
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return bad(format!("gamma {g} must be finite and >= 0"));
        }
        if self.dims.contains(&0) {
            return bad("dims must be positive".into());
        }
        if let Some(n) = self.n_per_class.iter().find(|&&n| n < 2) {
            return bad(format!("n_per_class {n} must be at least 2"));
        }
        if !(self.mean_norm_sq.is_finite() && self.mean_norm_sq >= 0.0) {
            return bad("mean_norm_sq must be finite and >= 0".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) || self.steps == 0 {
            return bad("horizon and steps must be positive".into());
        }
        if self.moment_samples < 2 || self.gap_trials == 0 {
            return bad("moment_samples must be >= 2 and gap_trials >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if let Some(model) = &self.model {
            if self.class >= model.classes() {
                return bad(format!("class {} out of range for {} classes", self.class, model.classes()));
            }
            if let Some(d) = self.dims.iter().find(|&&d| d != model.dim()) {
                return bad(format!("dims entry {d} differs from model dimension {}", model.dim()));
            }
        }
        Ok(())
    }

    /// Mean of the swept component in dimension `d`.
    pub fn component_mean(&self, d: usize) -> Vec<f64> {
        match &self.model {
            Some(m) => m.mean(self.class).to_vec(),
            None => {
                let mut mu = vec![0.0; d];
                mu[0] = self.mean_norm_sq.sqrt();
                mu
            }
        }
    }

    pub fn corruption(&self, gamma: f64) -> LabResult<CorruptionSpec> {
        Ok(CorruptionSpec::new(gamma, self.perturbation, self.form)?)
    }

    /// `gamma_grid × dims × n_per_class`, each axis sorted ascending.
    pub fn cells(&self) -> Vec<Cell> {
        let mut gammas = self.gamma_grid.clone();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mut dims = self.dims.clone();
        dims.sort_unstable();
        dims.dedup();
        let mut ns = self.n_per_class.clone();
        ns.sort_unstable();
        ns.dedup();
        let mut out = Vec::with_capacity(gammas.len() * dims.len() * ns.len());
        for &gamma in &gammas {
            for &dim in &dims {
                for &n in &ns {
                    out.push(Cell { gamma, dim, n_per_class: n });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub gamma: f64,
    pub dim: usize,
    pub n_per_class: usize,
}
