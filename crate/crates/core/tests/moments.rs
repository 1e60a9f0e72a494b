use adawct::{
    center, covariance, eigendecompose, random_spd, shrink, uniform_normalize, ActivationMap, CovarianceMatrix, Rng,
};
use proptest::prelude::*;

fn gaussian_map(seed: u64, c: usize, s: usize, scale: f64) -> ActivationMap {
    let mut rng = Rng::new(seed);
    let entries = (0..c * s).map(|i| scale * rng.normal() + (i % 5) as f64).collect();
    ActivationMap::new(c, 1, s, entries).unwrap()
}

fn all_entries_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centered_rows_have_zero_mean(seed in any::<u64>(), c in 1usize..9, s in 2usize..40) {
        let xbar = center(&gaussian_map(seed, c, s, 3.0));
        for i in 0..c {
            let m = xbar.row(i).iter().sum::<f64>() / s as f64;
            prop_assert!(m.abs() <= 1e-12, "row {} mean {}", i, m);
        }
    }

    #[test]
    fn covariance_is_symmetric_psd(seed in any::<u64>(), c in 1usize..12, s in 2usize..40) {
        let sigma = covariance(&center(&gaussian_map(seed, c, s, 2.0)));
        prop_assert_eq!(sigma.matrix().as_matrix().asymmetry(), 0.0);
        let eig = eigendecompose(sigma.matrix()).unwrap();
        prop_assert!(eig.min_eigenvalue() >= -1e-9, "min eig {}", eig.min_eigenvalue());
    }

    #[test]
    fn uniform_normalize_unit_std_and_idempotent(seed in any::<u64>(), c in 1usize..9, s in 2usize..40) {
        let xbar = center(&gaussian_map(seed, c, s, 5.0));
        let once = uniform_normalize(&xbar).unwrap();
        prop_assert!((all_entries_std(once.as_slice()) - 1.0).abs() <= 1e-12);
        for i in 0..c {
            let m = once.row(i).iter().sum::<f64>() / s as f64;
            prop_assert!(m.abs() <= 1e-12);
        }
        let twice = uniform_normalize(&once).unwrap();
        prop_assert!((twice.uniform_scale() / once.uniform_scale() - 1.0).abs() <= 1e-12);
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn covariance_scale_equivariance() {
    for seed in 0..20 {
        let xbar = center(&gaussian_map(seed, 6, 30, 1.0));
        let base = covariance(&xbar);
        for k in [1e-3, 1.0, 1e3] {
            let scaled = covariance(&xbar.scale(k));
            for (a, b) in scaled.matrix().as_slice().iter().zip(base.matrix().as_slice()) {
                let expected = k * k * b;
                assert!((a - expected).abs() <= 1e-12 * expected.abs().max(k * k), "k={k}");
            }
        }
    }
}

#[test]
fn shrink_shifts_every_eigenvalue() {
    let mut rng = Rng::new(77);
    for order in [2, 5, 16, 33] {
        let m = random_spd(order, 0.1, 10.0, &mut rng).unwrap();
        let before = eigendecompose(&m).unwrap().eigenvalues;
        for eps in [1e-5, 0.1, 2.0] {
            let sigma = CovarianceMatrix::from_matrix(m.clone(), 10);
            let after = eigendecompose(shrink(&sigma, eps).unwrap().matrix()).unwrap().eigenvalues;
            for (a, b) in after.iter().zip(&before) {
                assert!((a - b - eps).abs() <= 1e-12, "order {order} eps {eps}: {a} vs {b}");
            }
        }
    }
}
