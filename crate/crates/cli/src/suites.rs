//! Seeded property suites behind `adawct verify`.
//!
//! Every suite expands `(channel count, trial)` into cases, evaluates them
//! in parallel and reduces the per-case metrics in case order, so the report
//! does not depend on the thread count.

use std::fmt;

use adawct::{
    adain_with, adawct, analyze_convergence, center, covariance, covariance_rows, eigendecompose, newton_schulz,
    oracle_inverse_sqrt, random_spd, shrink, uniform_normalize, whiten_grouped, whitening_residual, AdaINParams,
    ActivationMap, ChannelStd, CovarianceMatrix, GroupLayout, Matrix, NewtonSchulzConfig, Rng, StyleParams,
    SymmetricMatrix,
};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub channels: Vec<usize>,
    pub epsilon: f64,
    pub iterations: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 42,
            channels: vec![8, 32, 64],
            epsilon: 1e-5,
            iterations: 14,
        }
    }
}

impl VerifyConfig {
    fn ns_config(&self) -> NewtonSchulzConfig {
        NewtonSchulzConfig {
            iterations: self.iterations,
            epsilon: self.epsilon,
            ..NewtonSchulzConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CheckSpec {
    name: &'static str,
    limit: f64,
    /// `worst < limit` instead of `worst <= limit`.
    strict: bool,
}

const fn at_most(name: &'static str, limit: f64) -> CheckSpec {
    CheckSpec {
        name,
        limit,
        strict: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub limit: f64,
    pub strict: bool,
    pub worst: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        if self.strict {
            self.worst < self.limit
        } else {
            self.worst <= self.limit
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub checks: Vec<Check>,
    /// First error raised by a case, in case order.
    pub error: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "pass" } else { "fail" };
        write!(f, "suite={} status={} cases={}", self.name, status, self.cases)?;
        for c in &self.checks {
            let op = if c.strict { "<" } else { "<=" };
            write!(f, " {}={:e}[{}{:e}]", c.name, c.worst, op, c.limit)?;
        }
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        if !failed.is_empty() {
            write!(f, " failed={}", failed.join(","))?;
        }
        if let Some(err) = &self.error {
            write!(f, " error=\"{err}\"")?;
        }
        Ok(())
    }
}

struct Case {
    channels: usize,
    rng: Rng,
}

fn cases(config: &VerifyConfig, salt: u64) -> Vec<Case> {
    let mut master = Rng::new(config.seed ^ salt);
    config
        .channels
        .iter()
        .flat_map(|&c| (0..config.trials).map(move |_| c))
        .map(|channels| Case {
            channels,
            rng: master.fork(),
        })
        .collect()
}

fn run_suite<F>(name: &'static str, specs: &[CheckSpec], cases: Vec<Case>, eval: F) -> SuiteOutcome
where
    F: Fn(Case) -> Result<Vec<f64>, String> + Sync + Send,
{
    let count = cases.len();
    let results: Vec<Result<Vec<f64>, String>> = cases.into_par_iter().map(eval).collect();

    let mut worst = vec![0.0f64; specs.len()];
    let mut error = None;
    for result in results {
        match result {
            Ok(metrics) => {
                for (w, m) in worst.iter_mut().zip(metrics) {
                    // NaN counts as the worst possible value.
                    *w = if m.is_nan() { f64::INFINITY } else { w.max(m) };
                }
            }
            Err(e) => {
                error.get_or_insert(e);
            }
        }
    }
    SuiteOutcome {
        name,
        cases: count,
        checks: specs
            .iter()
            .zip(worst)
            .map(|(s, worst)| Check {
                name: s.name,
                limit: s.limit,
                strict: s.strict,
                worst,
            })
            .collect(),
        error,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn gaussian_map(channels: usize, rng: &mut Rng) -> Result<ActivationMap, String> {
    ActivationMap::random_gaussian(channels, 4, channels, rng).map_err(|e| e.to_string())
}

pub fn moment_estimation(config: &VerifyConfig) -> SuiteOutcome {
    const SPECS: [CheckSpec; 7] = [
        at_most("row_mean", 1e-12),
        at_most("cov_asymmetry", 0.0),
        at_most("cov_negative_eig", 1e-9),
        at_most("scale_equivariance", 1e-12),
        at_most("unit_std", 1e-12),
        at_most("idempotence", 1e-12),
        at_most("shrink_shift", 1e-12),
    ];
    let epsilon = config.epsilon;
    run_suite("moment-estimation", &SPECS, cases(config, 0x11), |mut case| {
        let c = case.channels;
        let mut x = gaussian_map(c, &mut case.rng)?;
        let offsets: Vec<f64> = (0..c).map(|_| case.rng.uniform_in(-3.0, 3.0)).collect();
        let shifted: Vec<f64> = x
            .rows()
            .zip(&offsets)
            .flat_map(|(row, o)| row.iter().map(move |v| v + o))
            .collect();
        x = ActivationMap::new(c, x.height(), x.width(), shifted).map_err(|e| e.to_string())?;

        let xbar = center(&x);
        let s = xbar.samples() as f64;
        let row_mean = (0..c)
            .map(|i| (xbar.row(i).iter().sum::<f64>() / s).abs())
            .fold(0.0, f64::max);

        let sigma = covariance(&xbar);
        let asymmetry = sigma.matrix().as_matrix().asymmetry();
        let eig = eigendecompose(sigma.matrix()).map_err(|e| e.to_string())?;
        let negative = (-eig.min_eigenvalue()).max(0.0);

        let base_scale = sigma.matrix().as_matrix().max_abs().max(f64::MIN_POSITIVE);
        let equivariance = [1e-3, 1.0, 1e3]
            .iter()
            .map(|&k| {
                let scaled = covariance(&xbar.scale(k));
                let expected = sigma.matrix().scale(k * k);
                max_abs_diff(scaled.matrix().as_slice(), expected.as_slice()) / (k * k * base_scale)
            })
            .fold(0.0, f64::max);

        let once = uniform_normalize(&xbar).map_err(|e| e.to_string())?;
        let unit_std = (adawct::moments::global_std(once.as_slice()) - 1.0).abs();
        let twice = uniform_normalize(&once).map_err(|e| e.to_string())?;
        let idempotence = max_abs_diff(once.as_slice(), twice.as_slice())
            .max((twice.uniform_scale() / once.uniform_scale() - 1.0).abs());

        let shrunk = shrink(&sigma, epsilon).map_err(|e| e.to_string())?;
        let shifted_eig = eigendecompose(shrunk.matrix()).map_err(|e| e.to_string())?;
        let shrink_shift = shifted_eig
            .eigenvalues
            .iter()
            .zip(&eig.eigenvalues)
            .map(|(a, b)| (a - b - epsilon).abs())
            .fold(0.0, f64::max);

        Ok(vec![
            row_mean,
            asymmetry,
            negative,
            equivariance,
            unit_std,
            idempotence,
            shrink_shift,
        ])
    })
}

pub fn newton_schulz_suite(config: &VerifyConfig) -> SuiteOutcome {
    const SPECS: [CheckSpec; 3] = [
        at_most("residual", 1e-6),
        at_most("oracle_error", 1e-6),
        at_most("asymmetry", 1e-9),
    ];
    let ns = config.ns_config();
    run_suite("newton-schulz", &SPECS, cases(config, 0x22), |mut case| {
        let sigma = random_spd(case.channels, 0.1, 10.0, &mut case.rng).map_err(|e| e.to_string())?;
        let result = newton_schulz(&CovarianceMatrix::from_matrix(sigma.clone(), 2), &ns).map_err(|e| e.to_string())?;
        let sigma_eps = sigma.add_identity(ns.epsilon);
        let residual = whitening_residual(&result.w, &sigma_eps).map_err(|e| e.to_string())?;
        let oracle = oracle_inverse_sqrt(&sigma_eps).map_err(|e| e.to_string())?;
        let oracle_error = result.w.as_matrix().sub(oracle.as_matrix()).frobenius_norm() / oracle.frobenius_norm();
        Ok(vec![residual, oracle_error, result.w.as_matrix().asymmetry()])
    })
}

pub fn spectral_oracle(config: &VerifyConfig) -> SuiteOutcome {
    const SPECS: [CheckSpec; 5] = [
        CheckSpec {
            name: "sigma_max_a",
            limit: 1.0,
            strict: true,
        },
        at_most("cross_check", 1e-10),
        at_most("orthogonality", 1e-10),
        at_most("reconstruction", 1e-9),
        at_most("shift_lemma", 1e-10),
    ];
    let epsilon = config.epsilon;
    run_suite("spectral-oracle", &SPECS, cases(config, 0x33), |mut case| {
        let n = case.channels;
        let sigma = random_spd(n, 1e-6, 1e6, &mut case.rng).map_err(|e| e.to_string())?;
        let sigma_eps = shrink(&CovarianceMatrix::from_matrix(sigma, 2), epsilon).map_err(|e| e.to_string())?;
        let report = analyze_convergence(sigma_eps.matrix()).map_err(|e| e.to_string())?;

        let b = SymmetricMatrix::new(n, case.rng.normals(n * n)).map_err(|e| e.to_string())?;
        let eig = eigendecompose(&b).map_err(|e| e.to_string())?;
        let q = &eig.eigenvectors;
        let orthogonality = q.transpose().matmul(q).sub(&Matrix::identity(n)).frobenius_norm();
        let reconstruction =
            eig.reconstruct().as_matrix().sub(b.as_matrix()).frobenius_norm() / (1.0 + b.frobenius_norm());
        let mut shift = 0.0f64;
        for c in [-1.0, 0.5, 3.0] {
            let shifted = eigendecompose(&b.add_identity(c)).map_err(|e| e.to_string())?;
            for (s, v) in shifted.eigenvalues.iter().zip(&eig.eigenvalues) {
                shift = shift.max((s - (v + c)).abs());
            }
        }
        Ok(vec![
            report.sigma_max_a,
            report.cross_check_deviation,
            orthogonality,
            reconstruction,
            shift,
        ])
    })
}

/// Group sizes exercised for `channels`: powers of two dividing it, and `channels`.
fn group_sizes(channels: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..usize::BITS)
        .map(|p| 1usize << p)
        .take_while(|&g| g <= channels)
        .filter(|&g| channels.is_multiple_of(g))
        .collect();
    if sizes.last() != Some(&channels) {
        sizes.push(channels);
    }
    sizes
}

pub fn style_injection(config: &VerifyConfig) -> SuiteOutcome {
    const SPECS: [CheckSpec; 3] = [
        at_most("whitening", 1e-3),
        at_most("adain_degeneracy", 1e-10),
        at_most("scale_invariance", 1e-6),
    ];
    let ns = config.ns_config();
    run_suite("style-injection", &SPECS, cases(config, 0x44), |mut case| {
        let c = case.channels;
        let x = gaussian_map(c, &mut case.rng)?;

        let mut whitening = 0.0f64;
        for g in group_sizes(c) {
            let layout = GroupLayout::new(c, g).map_err(|e| e.to_string())?;
            let y = whiten_grouped(&x, &layout, &ns, true).map_err(|e| e.to_string())?;
            let ybar = center(&y);
            for j in 0..layout.group_count() {
                let cov = covariance_rows(&ybar, layout.group(j));
                let err = cov.matrix().as_matrix().sub(&Matrix::identity(g)).frobenius_norm() / (g as f64).sqrt();
                whitening = whitening.max(err);
            }
        }

        let layout = GroupLayout::new(c, 1).map_err(|e| e.to_string())?;
        let gammas: Vec<f64> = (0..c).map(|_| case.rng.uniform_in(0.5, 2.0)).collect();
        let mu = case.rng.normals(c);
        let style = StyleParams::new(mu.clone(), gammas.iter().map(|&g| Matrix::from_diagonal(&[g])).collect())
            .map_err(|e| e.to_string())?;
        let wct = adawct(&x, &style, &layout, &ns, false).map_err(|e| e.to_string())?;
        let params = AdaINParams::new(mu, gammas).map_err(|e| e.to_string())?;
        let aligned = adain_with(&x, &params, ChannelStd::Shrunk { epsilon: ns.epsilon }).map_err(|e| e.to_string())?;
        let degeneracy = max_abs_diff(wct.as_slice(), aligned.as_slice());

        let full = GroupLayout::new(c, c).map_err(|e| e.to_string())?;
        let base = whiten_grouped(&x, &full, &ns, true).map_err(|e| e.to_string())?;
        let mut invariance = 0.0f64;
        for k in [1e-3, 1e3] {
            let scaled = x.scale(k).map_err(|e| e.to_string())?;
            let y = whiten_grouped(&scaled, &full, &ns, true).map_err(|e| e.to_string())?;
            invariance = invariance.max(max_abs_diff(base.as_slice(), y.as_slice()));
        }

        Ok(vec![whitening, degeneracy, invariance])
    })
}

/// All suites in reporting order.
pub fn run_all(config: &VerifyConfig) -> Vec<SuiteOutcome> {
    vec![
        moment_estimation(config),
        newton_schulz_suite(config),
        spectral_oracle(config),
        style_injection(config),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            trials: 3,
            channels: vec![4, 12],
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn group_sizes_cover_powers_and_full() {
        assert_eq!(group_sizes(8), vec![1, 2, 4, 8]);
        assert_eq!(group_sizes(12), vec![1, 2, 4, 12]);
        assert_eq!(group_sizes(1), vec![1]);
    }

    #[test]
    fn small_run_passes() {
        for outcome in run_all(&small()) {
            assert!(outcome.passed(), "{outcome}");
            assert_eq!(outcome.cases, 6);
        }
    }

    #[test]
    fn single_iteration_fails_newton_schulz() {
        let config = VerifyConfig {
            iterations: 1,
            ..small()
        };
        let outcome = newton_schulz_suite(&config);
        assert!(!outcome.passed());
        assert!(!outcome.check("residual").unwrap().passed());
        assert!(outcome.to_string().contains("failed=residual"));
    }
}
