//! `verify`: the oracle and property suite as named pass/fail checks.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use condcorrupt::dynamics::{empirical_moments, finite_t_moments, integrate_reverse, limit_moments, GaussianMoments, IntegrationPlan};
use condcorrupt::metrics::{conditional_variance_check, entropy_gap_analytic, expected_w2_gap_mc, gaussian_entropy, w2_gaussians};
use condcorrupt::model::{point_stats, sample_component, schedule_at, ClassStats};
use condcorrupt::rng::{child, derive_seed, standard_normal};
use condcorrupt::score::{
    clean_denoiser, corrupted_denoiser, effective_spec, score_from_denoiser, sgd_train, solve_normal_equations,
    CorruptionForm, CorruptionSpec, MiniBatch, Perturbation, SgdConfig,
};
use condcorrupt::{Matrix, SymMatrix};

use crate::config::{Cell, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::results::{write_checks, CheckOutcome};
use crate::sweep::{cell_seed, cell_stats};

const TIMES: [f64; 4] = [0.01, 0.1, 1.0, 3.0];

type CheckResult = LabResult<(bool, String)>;

fn outcome(name: String, result: CheckResult) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(LabError::Model(e)) => CheckOutcome { name, passed: false, detail: format!("{}: {e}", e.kind()) },
        Err(e) => CheckOutcome { name, passed: false, detail: e.to_string() },
    }
}

/// Points around a seeded random mean, and their statistics.
fn random_dataset(seed: u64, index: u64, d: usize, n: usize) -> LabResult<(Vec<Vec<f64>>, ClassStats)> {
    let mut rng = child(seed, index);
    let mu: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
    let points = sample_component(&mu, n, &mut rng);
    let stats = point_stats(&points)?;
    Ok((points, stats))
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn oracle_grid(seed: u64, gamma: f64, form: CorruptionForm) -> CheckResult {
    let mut worst = 0.0f64;
    for d in 1..=8 {
        for (k, &t) in TIMES.iter().enumerate() {
            let (points, stats) = random_dataset(seed, (d * 16 + k) as u64, d, 4 * d + 6)?;
            let closed = corrupted_denoiser(&stats, &CorruptionSpec::gaussian(gamma, form)?, t)?;
            let oracle = solve_normal_equations(&points, t, gamma * gamma)?;
            worst = worst.max(closed.max_abs_diff(&oracle));
        }
    }
    Ok((worst < 1e-9, format!("max abs error {worst:.3e} (tol 1e-9)")))
}

fn zero_magnitude(seed: u64) -> CheckResult {
    let (_, stats) = random_dataset(seed, 1000, 5, 30)?;
    for form in [CorruptionForm::Isotropic, CorruptionForm::RankOne] {
        for &t in &TIMES {
            if corrupted_denoiser(&stats, &CorruptionSpec::gaussian(0.0, form)?, t)? != clean_denoiser(&stats, t)? {
                return Ok((false, format!("form {} differs at t={t}", form.as_str())));
            }
        }
    }
    Ok((true, "exact equality".into()))
}

fn one_dimension(seed: u64) -> CheckResult {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let (points, stats) = random_dataset(seed, 2000 + i, 1, 12)?;
        for &t in &TIMES {
            let iso = corrupted_denoiser(&stats, &CorruptionSpec::gaussian(0.4, CorruptionForm::Isotropic)?, t)?;
            let r1 = corrupted_denoiser(&stats, &CorruptionSpec::gaussian(0.4, CorruptionForm::RankOne)?, t)?;
            let oracle = solve_normal_equations(&points, t, 0.16)?;
            worst = worst.max(iso.max_abs_diff(&r1)).max(iso.max_abs_diff(&oracle));
        }
    }
    Ok((worst < 1e-9, format!("max abs error {worst:.3e} (tol 1e-9)")))
}

fn form_discrepancy(seed: u64, d: usize) -> CheckResult {
    let (_, stats) = random_dataset(seed, 3000, d, 10 * d + 10)?;
    let t = 0.5;
    let iso = corrupted_denoiser(&stats, &CorruptionSpec::gaussian(0.5, CorruptionForm::Isotropic)?, t)?;
    let r1 = corrupted_denoiser(&stats, &CorruptionSpec::gaussian(0.5, CorruptionForm::RankOne)?, t)?;
    Ok((true, format!("isotropic vs rank-one max abs difference {:.3e} at d={d} t={t} gamma=0.5 (reported)", iso.max_abs_diff(&r1))))
}

fn score_paths(seed: u64) -> CheckResult {
    let mut worst = 0.0f64;
    for d in [1, 3, 6] {
        let (_, stats) = random_dataset(seed, 4000 + d as u64, d, 5 * d + 4)?;
        let spec = CorruptionSpec::gaussian(0.3, CorruptionForm::RankOne)?;
        let eff = effective_spec(&stats, &spec)?;
        for &t in &TIMES {
            let x: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.5).collect();
            let a = score_from_denoiser(&corrupted_denoiser(&stats, &spec, t)?, &x)?;
            worst = worst.max(max_abs(&a, &eff.score(t, &x)?));
        }
    }
    Ok((worst < 1e-9, format!("max abs error {worst:.3e} (tol 1e-9)")))
}

fn cep_equivalence(seed: u64) -> CheckResult {
    let (points, _) = random_dataset(seed, 5000, 2, 30)?;
    let uniform = CorruptionSpec::new(0.3, Perturbation::Uniform, CorruptionForm::RankOne)?;
    let nu2 = uniform.embedding_variance(2);
    let matched = CorruptionSpec::new(nu2.sqrt(), Perturbation::Gaussian, CorruptionForm::RankOne)?;
    let a = solve_normal_equations(&points, 0.4, nu2)?;
    let b = solve_normal_equations(&points, 0.4, matched.embedding_variance(2))?;
    let err = a.max_abs_diff(&b);
    Ok((err < 1e-10, format!("max abs difference {err:.3e} (tol 1e-10)")))
}

fn sgd_convergence(seed: u64, perturbation: Perturbation) -> CheckResult {
    let (points, _) = random_dataset(seed, 6000, 2, 64)?;
    let spec = CorruptionSpec::new(0.1, perturbation, CorruptionForm::RankOne)?;
    let oracle = solve_normal_equations(&points, 0.5, spec.embedding_variance(2))?;
    let mut rng = child(seed, 6001);
    let trained = sgd_train(&points, 0.5, &spec, &SgdConfig::default(), &mut rng)?;
    let err = trained.max_abs_diff(&oracle);
    Ok((err < 1e-2, format!("max abs distance to oracle {err:.3e} after 50000 steps (tol 1e-2)")))
}

fn gradient_check(seed: u64) -> CheckResult {
    let mut worst = 0.0f64;
    let h = 1e-5;
    for i in 0..20u64 {
        let mut rng = child(seed, 7000 + i);
        let d = 1 + (i as usize % 4);
        let (points, _) = random_dataset(seed, 7100 + i, d, 10)?;
        let spec = CorruptionSpec::new(0.5, Perturbation::Gaussian, CorruptionForm::RankOne)?;
        let schedule = schedule_at(0.05 + 0.1 * i as f64)?;
        let batch = MiniBatch::draw(&points, &schedule, &spec, 16, &mut rng);
        let w = Matrix::new(d, (0..d * d).map(|_| standard_normal(&mut rng)).collect())?;
        let b: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let (gw, gb) = batch.gradient(&w, &b);
        for k in 0..d * d {
            let (mut p, mut m) = (w.clone(), w.clone());
            p.as_mut_slice()[k] += h;
            m.as_mut_slice()[k] -= h;
            let fd = (batch.loss(&p, &b) - batch.loss(&m, &b)) / (2.0 * h);
            worst = worst.max(relative(gw.as_slice()[k], fd));
        }
        for k in 0..d {
            let (mut p, mut m) = (b.clone(), b.clone());
            p[k] += h;
            m[k] -= h;
            let fd = (batch.loss(&w, &p) - batch.loss(&w, &m)) / (2.0 * h);
            worst = worst.max(relative(gb[k], fd));
        }
    }
    Ok((worst < 1e-5, format!("max relative error {worst:.3e} on 20 points (tol 1e-5)")))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn entropy_ratio() -> CheckResult {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in [2usize, 8, 32] {
        let mut mu = vec![0.0; d];
        mu[0] = 1.0;
        let stats = ClassStats::from_moments(0, 1000, mu, SymMatrix::identity(d))?;
        for g in [1e-3, 2e-3, 4e-3] {
            let ratio = entropy_gap_analytic(&stats, g)? / (g * g * d as f64);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo >= 0.4 && hi <= 0.6, format!("gap/(gamma^2 d) in [{lo:.6}, {hi:.6}] (allowed [0.4, 0.6])")))
}

fn w2_symmetry(seed: u64) -> CheckResult {
    let mut worst = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..20u64 {
        let mut rng = child(seed, 8000 + i);
        let d = 1 + (i as usize % 6);
        let mut draw = || -> LabResult<GaussianMoments> {
            let e: Vec<f64> = (0..d * d).map(|_| standard_normal(&mut rng)).collect();
            let cov = SymMatrix::from_fn(d, |a, b| (0..d).map(|k| e[a * d + k] * e[b * d + k]).sum::<f64>() / d as f64)?;
            let mean = (0..d).map(|k| 0.1 * k as f64).collect();
            Ok(GaussianMoments::new(mean, cov)?)
        };
        let (a, b) = (draw()?, draw()?);
        worst = worst.max((w2_gaussians(&a, &b)? - w2_gaussians(&b, &a)?).abs());
        diag = diag.max(w2_gaussians(&a, &a)?);
    }
    Ok((worst < 1e-9 && diag < 1e-9, format!("asymmetry {worst:.3e}, self-distance {diag:.3e} (tol 1e-9)")))
}

fn conditional_variance(seed: u64, n: usize) -> CheckResult {
    let expect = (n as f64 - 1.0) / n as f64;
    let r = conditional_variance_check(n, 4, 100_000, derive_seed(seed, 9000 + n as u64))?;
    let z = (r.estimate - expect).abs() / r.standard_error;
    Ok((z <= 3.0, format!("estimate {:.6} vs {expect:.6}, {z:.2} standard errors (tol 3)", r.estimate)))
}

fn entropy_two_path(cfg: &ExperimentConfig, cell: &Cell) -> CheckResult {
    let stats = cell_stats(cfg, cell)?;
    let analytic = entropy_gap_analytic(&stats, cell.gamma)?;
    let clean = limit_moments(&effective_spec(&stats, &CorruptionSpec::clean())?)?;
    let spec = CorruptionSpec::gaussian(cell.gamma, CorruptionForm::Isotropic)?;
    let corrupted = limit_moments(&effective_spec(&stats, &spec)?)?;
    let err = (analytic - (gaussian_entropy(&corrupted)? - gaussian_entropy(&clean)?)).abs();
    Ok((err < 1e-10, format!("gap {analytic:.6e}, two-path difference {err:.3e} (tol 1e-10)")))
}

fn moment_matching(cfg: &ExperimentConfig, cell: &Cell) -> CheckResult {
    let stats = cell_stats(cfg, cell)?;
    let spec = effective_spec(&stats, &cfg.corruption(cell.gamma)?)?;
    let plan = IntegrationPlan::new(cfg.horizon, cfg.steps)?;
    let seed = derive_seed(cell_seed(cfg.seed, cell.dim, cell.n_per_class), u64::MAX);
    let samples = integrate_reverse(&spec, &plan, cfg.moment_samples, seed)?;
    let emp = empirical_moments(&samples)?;
    let exact = finite_t_moments(&spec, cfg.horizon)?;
    let n = cfg.moment_samples as f64;
    let d = cell.dim;
    let mut mean_z = 0.0f64;
    for i in 0..d {
        mean_z = mean_z.max((emp.mean[i] - exact.mean[i]).abs() / (exact.cov.get(i, i) / n).sqrt());
    }
    let mut cov_ok = true;
    let mut cov_worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let (e, a) = (emp.cov.get(i, j), exact.cov.get(i, j));
            let se = ((exact.cov.get(i, i) * exact.cov.get(j, j) + a * a) / n).sqrt();
            let allowed = (4.0 * se).max(0.02 * a.abs());
            cov_ok &= (e - a).abs() <= allowed;
            cov_worst = cov_worst.max((e - a).abs() / allowed);
        }
    }
    Ok((
        mean_z <= 4.0 && cov_ok,
        format!("mean max z {mean_z:.2} (tol 4), covariance max deviation {cov_worst:.2} of allowance"),
    ))
}

fn w2_gap_positive(cfg: &ExperimentConfig, cell: &Cell) -> CheckResult {
    let mu = cfg.component_mean(cell.dim);
    let nu = cfg.corruption(cell.gamma)?.embedding_variance(cell.dim).sqrt();
    let seed = cell_seed(cfg.seed, cell.dim, cell.n_per_class);
    let r = expected_w2_gap_mc(&mu, cell.n_per_class, nu, cfg.form, cfg.gap_trials, seed)?;
    Ok((
        r.w2_gap > 2.0 * r.standard_error,
        format!("mean gap {:.4e}, SE {:.2e}, {} trials, {} rejected", r.w2_gap, r.standard_error, r.trials, r.rejected),
    ))
}

fn cell_label(cell: &Cell, with_gamma: bool) -> String {
    if with_gamma {
        format!("[gamma={},d={},n={}]", cell.gamma, cell.dim, cell.n_per_class)
    } else {
        format!("[d={},n={}]", cell.dim, cell.n_per_class)
    }
}

/// Runs every check; an error inside a check becomes a named failure.
pub fn run_checks(cfg: &ExperimentConfig) -> Vec<CheckOutcome> {
    let seed = cfg.seed;
    let mut out = vec![
        outcome("clean_oracle".into(), oracle_grid(seed, 0.0, CorruptionForm::Isotropic)),
        outcome("rank_one_oracle".into(), oracle_grid(seed, 0.3, CorruptionForm::RankOne)),
        outcome("zero_magnitude_reduction".into(), zero_magnitude(seed)),
        outcome("one_dimension_coincidence".into(), one_dimension(seed)),
        outcome("form_discrepancy".into(), form_discrepancy(seed, cfg.cells()[0].dim.max(2))),
        outcome("score_paths".into(), score_paths(seed)),
        outcome("cep_variance_equivalence".into(), cep_equivalence(seed)),
        outcome("sgd_convergence_gaussian".into(), sgd_convergence(seed, Perturbation::Gaussian)),
        outcome("sgd_convergence_uniform".into(), sgd_convergence(seed, Perturbation::Uniform)),
        outcome("gradient_check".into(), gradient_check(seed)),
        outcome("entropy_small_magnitude_ratio".into(), entropy_ratio()),
        outcome("w2_symmetry".into(), w2_symmetry(seed)),
        outcome("conditional_variance_n2".into(), conditional_variance(seed, 2)),
        outcome("conditional_variance_n10".into(), conditional_variance(seed, 10)),
    ];
    let cells = cfg.cells();
    let mut seen = Vec::new();
    for cell in &cells {
        let key = (cell.dim, cell.n_per_class);
        if !seen.contains(&key) {
            seen.push(key);
            let check = cell_stats(cfg, cell).map(|s| (true, format!("min eigenvalue {:.4e}", s.min_eigenvalue())));
            out.push(outcome(format!("full_rank{}", cell_label(cell, false)), check));
        }
    }
    for cell in &cells {
        let label = cell_label(cell, true);
        out.push(outcome(format!("entropy_two_path{label}"), entropy_two_path(cfg, cell)));
        out.push(outcome(format!("moment_matching{label}"), moment_matching(cfg, cell)));
        if cell.gamma > 0.0 {
            out.push(outcome(format!("w2_gap_positive{label}"), w2_gap_positive(cfg, cell)));
        }
    }
    out
}

/// Prints the summary, writes the check CSV when `out` is given, and
/// returns whether every check passed.
pub fn cmd_verify(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<bool> {
    let checks = run_checks(cfg);
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    if let Some(path) = out {
        write_checks(BufWriter::new(File::create(path)?), &checks)?;
    }
    Ok(failed == 0)
}
