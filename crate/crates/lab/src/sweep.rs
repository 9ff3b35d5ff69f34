//! Parameter sweeps over `gamma_grid × dims × n_per_class`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use condcorrupt::dynamics::{empirical_moments, finite_t_moments, integrate_reverse, IntegrationPlan};
use condcorrupt::metrics::{entropy_gap, expected_w2_gap_mc, gaussian_entropy};
use condcorrupt::model::{point_stats, require_full_rank, sample_component, ClassStats};
use condcorrupt::rng::{derive_seed, stream};
use condcorrupt::score::{effective_spec, CorruptionSpec, FULL_RANK_TOL};
use condcorrupt::dynamics::limit_moments;
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig};
use crate::error::LabResult;
use crate::results::{write_rows, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Entropy,
    Quality,
    Moments,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Entropy => "entropy",
            Target::Quality => "quality",
            Target::Moments => "moments",
        }
    }
}

/// Seed of the training set for `(dim, n)`. Independent of γ, so every
/// magnitude in a sweep sees the same datasets.
pub fn cell_seed(seed: u64, dim: usize, n: usize) -> u64 {
    derive_seed(seed, ((dim as u64) << 32) | n as u64)
}

/// Empirical statistics of the cell's training set.
pub fn cell_stats(cfg: &ExperimentConfig, cell: &Cell) -> LabResult<ClassStats> {
    let mu = cfg.component_mean(cell.dim);
    let mut rng = stream(cell_seed(cfg.seed, cell.dim, cell.n_per_class));
    let points = sample_component(&mu, cell.n_per_class, &mut rng);
    Ok(require_full_rank(point_stats(&points)?, FULL_RANK_TOL)?)
}

struct RowSink<'a> {
    cfg: &'a ExperimentConfig,
    target: Target,
    cell: Cell,
    rows: Vec<ResultRow>,
}

impl RowSink<'_> {
    fn push(&mut self, metric: &str, value: f64, standard_error: f64) {
        self.rows.push(ResultRow {
            experiment: self.target.as_str().into(),
            seed: self.cfg.seed,
            gamma: self.cell.gamma,
            dim: self.cell.dim,
            n_per_class: self.cell.n_per_class,
            form: self.cfg.form.as_str().into(),
            perturbation: self.cfg.perturbation.as_str().into(),
            metric: metric.into(),
            value,
            standard_error,
            wall_time_ms: 0,
        });
    }
}

fn entropy_cell(cfg: &ExperimentConfig, cell: &Cell, sink: &mut RowSink) -> LabResult<()> {
    let stats = cell_stats(cfg, cell)?;
    let spec = cfg.corruption(cell.gamma)?;
    let clean = limit_moments(&effective_spec(&stats, &CorruptionSpec::clean())?)?;
    let corrupted = limit_moments(&effective_spec(&stats, &spec)?)?;
    let gap = entropy_gap(&stats, &spec)?;
    sink.push("entropy_clean", gaussian_entropy(&clean)?, 0.0);
    sink.push("entropy_corrupted", gaussian_entropy(&corrupted)?, 0.0);
    sink.push("entropy_gap", gap, 0.0);
    if cell.gamma > 0.0 {
        sink.push("entropy_gap_ratio", gap / (cell.gamma * cell.gamma * cell.dim as f64), 0.0);
    }
    Ok(())
}

fn quality_cell(cfg: &ExperimentConfig, cell: &Cell, sink: &mut RowSink) -> LabResult<()> {
    let mu = cfg.component_mean(cell.dim);
    // The gap estimator perturbs with Gaussian noise; match the configured variance.
    let nu = cfg.corruption(cell.gamma)?.embedding_variance(cell.dim).sqrt();
    let seed = cell_seed(cfg.seed, cell.dim, cell.n_per_class);
    let r = expected_w2_gap_mc(&mu, cell.n_per_class, nu, cfg.form, cfg.gap_trials, seed)?;
    sink.push("w2_clean", r.w2_clean, 0.0);
    sink.push("w2_corrupted", r.w2_corrupted, 0.0);
    sink.push("w2_gap", r.w2_gap, r.standard_error);
    sink.push("entropy_gap", r.entropy_gap, 0.0);
    sink.push("rejected_datasets", r.rejected as f64, 0.0);
    Ok(())
}

fn moments_cell(cfg: &ExperimentConfig, cell: &Cell, sink: &mut RowSink) -> LabResult<()> {
    let stats = cell_stats(cfg, cell)?;
    let spec = effective_spec(&stats, &cfg.corruption(cell.gamma)?)?;
    let plan = IntegrationPlan::new(cfg.horizon, cfg.steps)?;
    let seed = derive_seed(cell_seed(cfg.seed, cell.dim, cell.n_per_class), u64::MAX);
    let samples = integrate_reverse(&spec, &plan, cfg.moment_samples, seed)?;
    let emp = empirical_moments(&samples)?;
    let exact = finite_t_moments(&spec, cfg.horizon)?;
    let n = cfg.moment_samples as f64;
    let d = cell.dim;
    let (mut mean_dev, mut mean_z) = (0.0f64, 0.0f64);
    for i in 0..d {
        let dev = (emp.mean[i] - exact.mean[i]).abs();
        mean_dev = mean_dev.max(dev);
        mean_z = mean_z.max(dev / (exact.cov.get(i, i) / n).sqrt());
    }
    let (mut cov_dev, mut cov_z) = (0.0f64, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            let dev = (emp.cov.get(i, j) - exact.cov.get(i, j)).abs();
            let se = ((exact.cov.get(i, i) * exact.cov.get(j, j) + exact.cov.get(i, j).powi(2)) / n).sqrt();
            cov_dev = cov_dev.max(dev);
            cov_z = cov_z.max(dev / se);
        }
    }
    sink.push("alpha", spec.alpha(), 0.0);
    sink.push("mean_max_abs_dev", mean_dev, 0.0);
    sink.push("mean_max_z", mean_z, 0.0);
    sink.push("cov_max_abs_dev", cov_dev, 0.0);
    sink.push("cov_max_z", cov_z, 0.0);
    Ok(())
}

/// Evaluates every cell (in parallel) and returns the rows in cell order.
pub fn sweep_rows(cfg: &ExperimentConfig, target: Target) -> LabResult<Vec<ResultRow>> {
    let per_cell: Vec<LabResult<Vec<ResultRow>>> = cfg
        .cells()
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let mut sink = RowSink { cfg, target, cell: *cell, rows: Vec::new() };
            match target {
                Target::Entropy => entropy_cell(cfg, cell, &mut sink)?,
                Target::Quality => quality_cell(cfg, cell, &mut sink)?,
                Target::Moments => moments_cell(cfg, cell, &mut sink)?,
            }
            if cfg.record_timing {
                let ms = start.elapsed().as_millis() as u64;
                sink.rows.iter_mut().for_each(|r| r.wall_time_ms = ms);
            }
            Ok(sink.rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_cell {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, target: Target, out: &Path) -> LabResult<Vec<ResultRow>> {
    let rows = sweep_rows(cfg, target)?;
    let file = BufWriter::new(File::create(out)?);
    write_rows(file, &rows)?;
    Ok(rows)
}
