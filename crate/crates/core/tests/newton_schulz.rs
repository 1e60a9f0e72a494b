use adawct::{
    newton_schulz, oracle_inverse_sqrt, random_spd, whitening_residual, CovarianceMatrix, NewtonSchulzConfig, Rng,
    SymmetricMatrix,
};

fn cov(m: SymmetricMatrix) -> CovarianceMatrix {
    CovarianceMatrix::from_matrix(m, 2)
}

fn relative_error(a: &SymmetricMatrix, b: &SymmetricMatrix) -> f64 {
    a.as_matrix().sub(b.as_matrix()).frobenius_norm() / b.frobenius_norm()
}

#[test]
fn converges_against_oracle() {
    let config = NewtonSchulzConfig::new(14, 1e-5).unwrap();
    let mut rng = Rng::new(2024);
    for trial in 0..100 {
        let order = 1 + trial % 64;
        let sigma = random_spd(order, 0.1, 10.0, &mut rng).unwrap();
        let result = newton_schulz(&cov(sigma.clone()), &config).unwrap();
        let sigma_eps = sigma.add_identity(1e-5);
        let residual = whitening_residual(&result.w, &sigma_eps).unwrap();
        assert!(residual <= 1e-6, "trial {trial}: residual {residual:e}");
        let oracle = oracle_inverse_sqrt(&sigma_eps).unwrap();
        let rel = relative_error(&result.w, &oracle);
        assert!(rel <= 1e-6, "trial {trial}: relative error {rel:e}");
        assert!(result.converged);
        assert_eq!(result.residuals.len(), 14);
        assert!(result.w.as_matrix().asymmetry() <= 1e-9);
    }
}

#[test]
fn residual_tail_is_monotone() {
    let config = NewtonSchulzConfig::new(20, 1e-5).unwrap();
    let mut rng = Rng::new(5);
    for trial in 0..40 {
        let sigma = random_spd(2 + trial, 0.1, 10.0, &mut rng).unwrap();
        let r = newton_schulz(&cov(sigma), &config).unwrap().residuals;
        let start = r.iter().position(|&v| v < 0.5).expect("enters quadratic regime");
        for i in start..r.len() - 1 {
            // Past the noise floor the residual only wanders at round-off level.
            assert!(r[i + 1] <= r[i] || r[i + 1] < 1e-12, "trial {trial} step {i}: {r:?}");
        }
    }
}

#[test]
fn compensation_makes_output_scale_correct() {
    let config = NewtonSchulzConfig::new(14, 1e-5).unwrap();
    let mut rng = Rng::new(99);
    for order in [2, 7, 16, 40] {
        let sigma = random_spd(order, 0.1, 10.0, &mut rng).unwrap();
        let sigma_eps = sigma.add_identity(config.epsilon);
        let base = newton_schulz(&cov(sigma.clone()), &config).unwrap();

        // The iteration only ever sees Σ_ε / ‖Σ_ε‖_F.
        let norm = sigma_eps.frobenius_norm();
        assert_eq!(base.frobenius_norm, norm);

        for c in [1e-4, 1.0, 1e4] {
            // Shrink first so that c Σ_ε enters the iteration with the same spectrum shape.
            let scaled = sigma_eps.scale(c).add_identity(-config.epsilon);
            let result = newton_schulz(&cov(scaled), &config).unwrap();
            let expected = base.w.scale(c.powf(-0.5));
            let rel = relative_error(&result.w, &expected);
            assert!(rel <= 1e-8, "order {order} c {c}: {rel:e}");
        }
    }
}

#[test]
fn bit_identical_across_runs() {
    let config = NewtonSchulzConfig::default();
    let sigma = random_spd(32, 0.1, 10.0, &mut Rng::new(1)).unwrap();
    let a = newton_schulz(&cov(sigma.clone()), &config).unwrap();
    let b = newton_schulz(&cov(sigma), &config).unwrap();
    let bits = |m: &SymmetricMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.w), bits(&b.w));
    assert_eq!(a.residuals, b.residuals);
}

#[test]
fn near_singular_covariance_is_conditioned_by_shrinkage() {
    // Rank-one covariance: only εI keeps the inverse square root finite.
    let config = NewtonSchulzConfig::new(30, 1e-2).unwrap();
    let sigma = SymmetricMatrix::new(2, vec![2.0, 2.0, 2.0, 2.0]).unwrap();
    let r = newton_schulz(&cov(sigma.clone()), &config).unwrap();
    let oracle = oracle_inverse_sqrt(&sigma.add_identity(1e-2)).unwrap();
    assert!(relative_error(&r.w, &oracle) < 1e-8);
}
