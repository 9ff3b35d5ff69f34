use condcorrupt::dynamics::{finite_t_moments, limit_moments, GaussianMoments};
use condcorrupt::metrics::{entropy_gap_analytic, gaussian_entropy, w2_gaussians};
use condcorrupt::model::{class_stats, ClassStats, LabeledDataset};
use condcorrupt::score::{effective_spec, CorruptionForm, CorruptionSpec};
use condcorrupt::spectral::eigendecompose;
use condcorrupt::SymMatrix;
use proptest::prelude::*;

/// `B Bᵀ / d + floor·I` from `d²` entries.
fn spd(d: usize, entries: &[f64], floor: f64) -> SymMatrix {
    SymMatrix::from_fn(d, |i, j| {
        let dot: f64 = (0..d).map(|k| entries[i * d + k] * entries[j * d + k]).sum();
        dot / d as f64 + if i == j { floor } else { 0.0 }
    })
    .unwrap()
}

fn spd_strategy(floor: f64) -> impl Strategy<Value = SymMatrix> {
    (1usize..=6).prop_flat_map(move |d| {
        prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |e| spd(d, &e, floor))
    })
}

fn stats_strategy() -> impl Strategy<Value = ClassStats> {
    (1usize..=6).prop_flat_map(|d| {
        (prop::collection::vec(-2.0f64..2.0, d * d), prop::collection::vec(-1.5f64..1.5, d))
            .prop_map(move |(e, mu)| ClassStats::from_moments(0, 100, mu, spd(d, &e, 0.2)).unwrap())
    })
}

fn gaussian_strategy() -> impl Strategy<Value = GaussianMoments> {
    spd_strategy(0.0).prop_flat_map(|cov| {
        let d = cov.dim();
        prop::collection::vec(-2.0f64..2.0, d).prop_map(move |m| GaussianMoments::new(m, cov.clone()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_reconstructs(a in spd_strategy(0.0)) {
        let s = eigendecompose(&a).unwrap();
        prop_assert!(s.reconstruct().max_abs_diff(&a) <= 1e-10 * a.max_abs().max(1.0));
        let v = s.eigenvectors();
        let vtv = v.transpose().matmul(v);
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((vtv.get(i, j) - target).abs() < 1e-10);
            }
        }
        prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn spectral_functions_compose(a in spd_strategy(0.1)) {
        let s = eigendecompose(&a).unwrap();
        let inv = s.apply_spectral(|l| 1.0 / l).unwrap();
        let prod = inv.to_matrix().matmul(&a.to_matrix());
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod.get(i, j) - target).abs() < 1e-8);
            }
        }
        let root = s.apply_spectral(f64::sqrt).unwrap().to_matrix();
        prop_assert!(root.matmul(&root).max_abs_diff(&a.to_matrix()) < 1e-9 * a.max_abs().max(1.0));
        let inv_log_det = eigendecompose(&inv).unwrap().log_det().unwrap();
        prop_assert!((inv_log_det + s.log_det().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn generation_moments_converge_monotonically(stats in stats_strategy(), gamma in 0.0f64..1.5) {
        let spec = effective_spec(&stats, &CorruptionSpec::gaussian(gamma, CorruptionForm::Isotropic).unwrap()).unwrap();
        let limit = limit_moments(&spec).unwrap();
        let mut last = f64::INFINITY;
        for horizon in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let m = finite_t_moments(&spec, horizon).unwrap();
            let err = m.cov.max_abs_diff(&limit.cov)
                .max(m.mean.iter().zip(&limit.mean).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())));
            prop_assert!(err <= last + 1e-12);
            last = err;
        }
        prop_assert!(last < 1e-5 * (1.0 + limit.cov.max_abs()));
    }

    #[test]
    fn w2_vanishes_on_diagonal_and_is_symmetric(a in gaussian_strategy(), seed in any::<u64>()) {
        prop_assert!(w2_gaussians(&a, &a).unwrap() < 1e-9);
        let d = a.dim();
        let e: Vec<f64> = (0..d * d).map(|k| ((seed >> (k % 60)) & 7) as f64 / 4.0 - 0.8).collect();
        let b = GaussianMoments::new(vec![0.3; d], spd(d, &e, 0.05)).unwrap();
        let ab = w2_gaussians(&a, &b).unwrap();
        let ba = w2_gaussians(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9 * (1.0 + ab));
    }

    #[test]
    fn w2_commuting_covariances(
        pairs in prop::collection::vec((0.0f64..4.0, 0.0f64..4.0, -2.0f64..2.0), 1..6),
        a in spd_strategy(0.1),
    ) {
        let d = pairs.len();
        // Shared eigenbasis taken from an arbitrary SPD matrix of matching size.
        let basis = if a.dim() == d { eigendecompose(&a).unwrap() } else { eigendecompose(&SymMatrix::identity(d)).unwrap() };
        let la: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let lb: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let dm: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let ma = GaussianMoments::new(vec![0.0; d], basis.compose(&la).unwrap()).unwrap();
        let mb = GaussianMoments::new(dm.clone(), basis.compose(&lb).unwrap()).unwrap();
        let expect: f64 = la.iter().zip(&lb).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>()
            + dm.iter().map(|x| x * x).sum::<f64>();
        let got = w2_gaussians(&ma, &mb).unwrap();
        prop_assert!((got - expect).abs() < 1e-9 * (1.0 + expect), "{} vs {}", got, expect);
    }

    #[test]
    fn entropy_gap_two_paths(stats in stats_strategy(), gamma in 0.0f64..2.0) {
        let analytic = entropy_gap_analytic(&stats, gamma).unwrap();
        let clean = limit_moments(&effective_spec(&stats, &CorruptionSpec::clean()).unwrap()).unwrap();
        let spec = CorruptionSpec::gaussian(gamma, CorruptionForm::Isotropic).unwrap();
        let corrupted = limit_moments(&effective_spec(&stats, &spec).unwrap()).unwrap();
        let two_path = gaussian_entropy(&corrupted).unwrap() - gaussian_entropy(&clean).unwrap();
        prop_assert!(analytic >= 0.0);
        prop_assert!((analytic - two_path).abs() < 1e-10, "{} vs {}", analytic, two_path);
    }

    #[test]
    fn entropy_gap_increases_with_magnitude(stats in stats_strategy(), g in 0.01f64..1.0, step in 0.01f64..1.0) {
        prop_assume!(stats.mean_norm_sq() > 1e-6);
        let lo = entropy_gap_analytic(&stats, g).unwrap();
        let hi = entropy_gap_analytic(&stats, g + step).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn class_stats_permutation_and_duplication_invariant(
        points in (1usize..=4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), 2..20)),
        rotate in 0usize..20,
    ) {
        let data = LabeledDataset::single_class(points.clone()).unwrap();
        let base = class_stats(&data, 0).unwrap();

        let mut permuted = points.clone();
        let k = rotate % permuted.len();
        permuted.rotate_left(k);
        permuted.reverse();
        let p = class_stats(&LabeledDataset::single_class(permuted).unwrap(), 0).unwrap();

        let doubled: Vec<Vec<f64>> = points.iter().chain(points.iter()).cloned().collect();
        let dup = class_stats(&LabeledDataset::single_class(doubled).unwrap(), 0).unwrap();

        for other in [&p, &dup] {
            let mean_err = base.mean().iter().zip(other.mean()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(mean_err < 1e-12);
            prop_assert!(base.cov().max_abs_diff(other.cov()) < 1e-11);
        }
        prop_assert_eq!(dup.count(), 2 * base.count());
    }
}

#[test]
fn entropy_gap_small_magnitude_ratio() {
    for d in [2usize, 8, 32] {
        let mut mu = vec![0.0; d];
        mu[0] = 1.0;
        let stats = ClassStats::from_moments(0, 1000, mu, SymMatrix::identity(d)).unwrap();
        for gamma in [1e-3, 2e-3, 4e-3] {
            let ratio = entropy_gap_analytic(&stats, gamma).unwrap() / (gamma * gamma * d as f64);
            assert!((0.4..=0.6).contains(&ratio), "d={d} gamma={gamma}: {ratio}");
        }
    }
}
