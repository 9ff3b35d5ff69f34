//! Raw reverse-ODE samples for external plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use condcorrupt::csvfmt::format_real;
use condcorrupt::dynamics::{integrate_reverse, IntegrationPlan, SampleMatrix};
use condcorrupt::rng::derive_seed;
use condcorrupt::score::{effective_spec, EffectiveScoreSpec};

use crate::config::{Cell, ExperimentConfig};
use crate::error::LabResult;
use crate::sweep::{cell_seed, cell_stats};

/// `# alpha=…,eigenvalues=…` followed by the column names.
pub fn sample_header(spec: &EffectiveScoreSpec) -> Vec<String> {
    let eig: Vec<String> = spec.spectrum().eigenvalues().iter().map(|&l| format_real(l)).collect();
    let cols: Vec<String> = (0..spec.dim()).map(|i| format!("x{i}")).collect();
    vec![format!("# alpha={};eigenvalues={}", format_real(spec.alpha()), eig.join(" ")), cols.join(",")]
}

/// Integrates `moment_samples` points for the first (smallest) dimension and
/// sample size of the config at magnitude `gamma`.
pub fn generate(cfg: &ExperimentConfig, gamma: f64) -> LabResult<(EffectiveScoreSpec, SampleMatrix)> {
    let first = cfg.cells()[0];
    let cell = Cell { gamma, ..first };
    let stats = cell_stats(cfg, &cell)?;
    let spec = effective_spec(&stats, &cfg.corruption(gamma)?)?;
    let plan = IntegrationPlan::new(cfg.horizon, cfg.steps)?;
    let seed = derive_seed(cell_seed(cfg.seed, cell.dim, cell.n_per_class), u64::MAX);
    let samples = integrate_reverse(&spec, &plan, cfg.moment_samples, seed)?;
    Ok((spec, samples))
}

pub fn cmd_sample(cfg: &ExperimentConfig, gamma: f64, out: &Path) -> LabResult<()> {
    let (spec, samples) = generate(cfg, gamma)?;
    let mut file = BufWriter::new(File::create(out)?);
    samples.write_csv(&mut file, &sample_header(&spec))?;
    file.flush()?;
    Ok(())
}
